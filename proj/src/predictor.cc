#include "fnpc/predictor.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fnpc/error.h"
#include "fnpc/random.h"

namespace fnpc {

namespace {

// Double-precision copy of both layers, used wherever the network is trained
// or differentiated.
struct DenseNet {
  int inputs = 0;
  int hidden = 0;
  std::vector<double> w1;  // hidden x inputs
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static DenseNet from(const MappingModel& model, std::span<const double> w2,
                       double b2) {
    DenseNet net;
    net.inputs = model.pred_window;
    net.hidden = model.hidden_units();
    net.w1.assign(model.w1.begin(), model.w1.end());
    net.b1.assign(model.hidden_bias.begin(), model.hidden_bias.end());
    net.w2.assign(w2.begin(), w2.end());
    net.b2 = b2;
    return net;
  }

  void hidden_layer(const double* x, double* z) const {
    for (int i = 0; i < hidden; ++i) {
      const double* row = &w1[static_cast<std::size_t>(i) * inputs];
      double v = b1[i];
      for (int j = 0; j < inputs; ++j) v += row[j] * x[j];
      z[i] = std::tanh(v);
    }
  }

  double output(const double* z) const {
    double v = b2;
    for (int i = 0; i < hidden; ++i) v += w2[i] * z[i];
    return v;
  }

  double predict(const double* x, double* z) const {
    hidden_layer(x, z);
    return output(z);
  }

  double total_loss(const TrainingSet& set) const {
    std::vector<double> z(hidden);
    double f = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
      const double e = set.targets[k] - predict(set.inputs[k].data(), z.data());
      f += 0.5 * e * e;
    }
    return f;
  }
};

void check_dims(const MappingModel& model, std::size_t w2_size,
                std::size_t input_size) {
  const auto h = static_cast<std::size_t>(model.hidden_units());
  if (w2_size != h) {
    throw Error("output weight count " + std::to_string(w2_size) +
                " does not match " + std::to_string(h) + " hidden units");
  }
  if (input_size != static_cast<std::size_t>(model.pred_window)) {
    throw Error("input length " + std::to_string(input_size) +
                " does not match prediction window " +
                std::to_string(model.pred_window));
  }
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-7) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

void PredictorConfig::validate() const {
  if (pred_window < 1) throw Error("prediction window must be >= 1");
  if (num_codes < 2) throw Error("number of codes must be >= 2");
  if (!(map_learning_rate > 0.0) || !(code_learning_rate > 0.0)) {
    throw Error("learning rates must be positive");
  }
  if (map_epochs < 0 || code_iterations < 0) {
    throw Error("epoch and iteration counts must be non-negative");
  }
  if (map_block < 0 || (map_block > 0 && map_block <= pred_window)) {
    throw Error("mapping block length must be 0 or exceed the prediction window");
  }
}

void MappingModel::validate() const {
  window.validate();
  const auto h = static_cast<std::size_t>(hidden_units());
  if (pred_window < 1 || num_codes < 2) throw Error("invalid model dimensions");
  if (pred_window >= window.length) {
    throw Error("prediction window must be shorter than the frame");
  }
  if (hidden_bias.size() != h ||
      w1.size() != h * static_cast<std::size_t>(pred_window)) {
    throw Error("model weight arrays do not match its dimensions");
  }
  if (!(norm.std_dev > 0.0)) throw Error("model std_dev must be positive");
  const auto finite = [](float v) { return std::isfinite(v); };
  if (!std::all_of(w1.begin(), w1.end(), finite) ||
      !std::all_of(hidden_bias.begin(), hidden_bias.end(), finite)) {
    throw Error("model contains non-finite weights");
  }
}

TrainingSet build_training_set(std::span<const double> frame,
                               int pred_window) {
  const auto n = frame.size();
  const auto l = static_cast<std::size_t>(pred_window);
  if (pred_window < 1 || n <= l) {
    throw Error("frame shorter than prediction window: N=" + std::to_string(n) +
                ", L=" + std::to_string(pred_window));
  }
  TrainingSet set;
  set.inputs.reserve(n - l);
  set.targets.reserve(n - l);
  for (std::size_t k = l; k < n; ++k) {
    std::vector<double> x(l);
    for (std::size_t j = 0; j < l; ++j) x[j] = frame[k - 1 - j];
    set.inputs.push_back(std::move(x));
    set.targets.push_back(frame[k]);
  }
  return set;
}

ForwardResult forward(const MappingModel& model, std::span<const float> w2,
                      double output_bias, std::span<const double> input) {
  check_dims(model, w2.size(), input.size());
  const int h = model.hidden_units();
  ForwardResult r;
  r.hidden.resize(h);
  double v = output_bias;
  for (int i = 0; i < h; ++i) {
    double a = model.hidden_bias[i];
    for (int j = 0; j < model.pred_window; ++j) a += model.weight(i, j) * input[j];
    r.hidden[i] = std::tanh(a);
    v += w2[i] * r.hidden[i];
  }
  r.pre_activation = v;
  r.prediction = v;  // linear output neuron
  return r;
}

double loss(std::span<const double> predictions,
            std::span<const double> targets) {
  if (predictions.empty()) throw Error("loss of an empty sequence");
  if (predictions.size() != targets.size()) throw Error("loss: length mismatch");
  double f = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double e = targets[k] - predictions[k];
    f += e * e;
  }
  return 0.5 * f;
}

MappingModel initial_mapping(const PredictorConfig& cfg, Domain domain,
                             const WindowSpec& window, int sample_rate,
                             const NormStats& norm) {
  cfg.validate();
  MappingModel model;
  model.domain = domain;
  model.window = window;
  model.sample_rate = sample_rate;
  model.pred_window = cfg.pred_window;
  model.num_codes = cfg.num_codes;
  model.norm = norm;
  const auto h = static_cast<std::size_t>(cfg.hidden_units());
  const auto l = static_cast<std::size_t>(cfg.pred_window);
  model.hidden_bias.assign(h, 0.0f);
  model.w1.resize(h * l);
  Rng rng(mix_seed(cfg.rng_seed, 0));
  const double bound = 1.0 / std::sqrt(static_cast<double>(l));
  for (float& w : model.w1) w = static_cast<float>(rng.uniform(-bound, bound));
  return model;
}

std::vector<std::uint32_t> mapping_targets(std::size_t length,
                                           const PredictorConfig& cfg) {
  if (length > UINT32_MAX) throw Error("mapping corpus too long");
  const auto l = static_cast<std::size_t>(cfg.pred_window);
  const auto block = static_cast<std::size_t>(cfg.map_block);
  std::vector<std::uint32_t> out;
  if (length > l) out.reserve(length - l);
  for (std::size_t k = l; k < length; ++k) {
    if (block == 0 || k % block >= l) out.push_back(static_cast<std::uint32_t>(k));
  }
  return out;
}

MappingModel train_mapping(std::span<const double> samples,
                           const PredictorConfig& cfg, Domain domain,
                           const WindowSpec& window, int sample_rate,
                           const NormStats& norm, MappingLog* log) {
  MappingModel model = initial_mapping(cfg, domain, window, sample_rate, norm);
  const auto l = static_cast<std::size_t>(cfg.pred_window);
  if (samples.size() <= l) {
    throw Error("mapping corpus has " + std::to_string(samples.size()) +
                " samples, needs more than the prediction window");
  }
  if (cfg.map_epochs == 0) return model;

  const int h = cfg.hidden_units();
  DenseNet net;
  net.inputs = cfg.pred_window;
  net.hidden = h;
  net.w1.assign(model.w1.begin(), model.w1.end());
  net.b1.assign(h, 0.0);
  // The output head is only scaffolding for this phase.
  Rng rng(mix_seed(cfg.rng_seed, 1));
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(h));
  net.w2.resize(h);
  for (double& w : net.w2) w = rng.uniform(-head_bound, head_bound);
  net.b2 = 0.0;

  std::vector<std::uint32_t> order = mapping_targets(samples.size(), cfg);
  const std::size_t pairs = order.size();
  if (pairs == 0) throw Error("mapping corpus yields no training pairs");
  std::vector<double> x(l), z(h), delta(h);
  const double lr = cfg.map_learning_rate;

  for (int epoch = 0; epoch < cfg.map_epochs; ++epoch) {
    for (std::size_t i = pairs - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(i + 1)]);
    }
    double epoch_loss = 0.0;
    for (std::uint32_t k : order) {
      for (std::size_t j = 0; j < l; ++j) x[j] = samples[k - 1 - j];
      const double e = samples[k] - net.predict(x.data(), z.data());
      if (!std::isfinite(e)) {
        throw Error("divergence in mapping phase at epoch " +
                    std::to_string(epoch + 1) + "; lower the learning rate");
      }
      epoch_loss += 0.5 * e * e;
      // Back-propagate with the pre-update output weights.
      for (int i = 0; i < h; ++i) {
        delta[i] = e * net.w2[i] * (1.0 - z[i] * z[i]);
      }
      for (int i = 0; i < h; ++i) net.w2[i] += lr * e * z[i];
      net.b2 += lr * e;
      for (int i = 0; i < h; ++i) {
        const double step = lr * delta[i];
        double* row = &net.w1[static_cast<std::size_t>(i) * l];
        for (std::size_t j = 0; j < l; ++j) row[j] += step * x[j];
        net.b1[i] += step;
      }
    }
    epoch_loss /= static_cast<double>(pairs);
    if (!std::isfinite(epoch_loss)) {
      throw Error("divergence in mapping phase at epoch " +
                  std::to_string(epoch + 1) + "; lower the learning rate");
    }
    if (log != nullptr) log->epoch_loss.push_back(epoch_loss);
  }

  for (std::size_t i = 0; i < model.w1.size(); ++i) {
    model.w1[i] = static_cast<float>(net.w1[i]);
  }
  for (int i = 0; i < h; ++i) model.hidden_bias[i] = static_cast<float>(net.b1[i]);
  model.validate();
  return model;
}

FrameCode code_frame(const MappingModel& model, const Frame& frame,
                     const CodingOptions& options, CodingTrace* trace) {
  if (frame.domain != model.domain) {
    throw Error("frame " + std::to_string(frame.index) + " is in the " +
                std::string(domain_name(frame.domain)) +
                " domain but the model expects " +
                std::string(domain_name(model.domain)));
  }
  if (frame.values.size() != static_cast<std::size_t>(model.window.length)) {
    throw Error("frame " + std::to_string(frame.index) + " has length " +
                std::to_string(frame.values.size()) + ", model expects " +
                std::to_string(model.window.length));
  }
  const TrainingSet set = build_training_set(frame, model.pred_window);
  const int h = model.hidden_units();
  const std::size_t p = static_cast<std::size_t>(h) + 1;  // weights + bias
  const std::size_t count = set.size();

  std::vector<double> zero_head(h, 0.0);
  const DenseNet net = DenseNet::from(model, zero_head, 0.0);

  // Design matrix rows [Z_k, 1]; the hidden layer is frozen, so these never
  // change during coding.
  std::vector<double> design(count * p);
  for (std::size_t k = 0; k < count; ++k) {
    double* row = &design[k * p];
    net.hidden_layer(set.inputs[k].data(), row);
    row[h] = 1.0;
  }
  // Normal equations of 1/2 ||y - A w||^2: gradient = G w - r.
  std::vector<double> gram(p * p, 0.0), rhs(p, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const double* row = &design[k * p];
    for (std::size_t a = 0; a < p; ++a) {
      rhs[a] += row[a] * set.targets[k];
      for (std::size_t b = a; b < p; ++b) gram[a * p + b] += row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < a; ++b) gram[a * p + b] = gram[b * p + a];
  }

  double trace_bound = 0.0, row_bound = 0.0;
  for (std::size_t a = 0; a < p; ++a) {
    trace_bound += gram[a * p + a];
    double row_sum = 0.0;
    for (std::size_t b = 0; b < p; ++b) row_sum += std::abs(gram[a * p + b]);
    row_bound = std::max(row_bound, row_sum);
  }
  const double lipschitz = std::min(trace_bound, row_bound);
  const double step = lipschitz > 0.0
                          ? std::min(options.learning_rate, 1.0 / lipschitz)
                          : options.learning_rate;

  std::vector<double> w(p, 0.0);
  if (options.init_scale != 0.0) {
    Rng rng(mix_seed(options.seed, 2 + frame.index));
    const double bound = options.init_scale / std::sqrt(static_cast<double>(h));
    for (int i = 0; i < h; ++i) w[i] = rng.uniform(-bound, bound);
  }

  const auto residual_loss = [&]() {
    double f = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const double* row = &design[k * p];
      double y = 0.0;
      for (std::size_t a = 0; a < p; ++a) y += row[a] * w[a];
      const double e = set.targets[k] - y;
      f += 0.5 * e * e;
    }
    return f;
  };
  if (trace != nullptr) {
    trace->step = step;
    trace->loss.clear();
    trace->loss.push_back(residual_loss());
  }

  std::vector<double> grad(p);
  for (int it = 0; it < options.iterations; ++it) {
    for (std::size_t a = 0; a < p; ++a) {
      double g = -rhs[a];
      const double* row = &gram[a * p];
      for (std::size_t b = 0; b < p; ++b) g += row[b] * w[b];
      grad[a] = g;
    }
    for (std::size_t a = 0; a < p; ++a) w[a] -= step * grad[a];
    if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); })) {
      throw Error("coding divergence, reduce the code learning rate (frame " +
                  std::to_string(frame.index) + ")");
    }
    if (trace != nullptr) trace->loss.push_back(residual_loss());
  }

  FrameCode code;
  code.frame_index = static_cast<std::uint32_t>(frame.index);
  code.domain = frame.domain;
  code.seed.resize(model.pred_window);
  for (int j = 0; j < model.pred_window; ++j) {
    code.seed[j] = static_cast<float>(frame.values[j]);
  }
  code.w2.resize(h);
  for (int i = 0; i < h; ++i) code.w2[i] = static_cast<float>(w[i]);
  code.output_bias = static_cast<float>(w[h]);
  return code;
}

Frame predict_frame(const MappingModel& model, const FrameCode& code) {
  const auto l = static_cast<std::size_t>(model.pred_window);
  const auto n = static_cast<std::size_t>(model.window.length);
  if (code.seed.size() != l || code.w2.size() != static_cast<std::size_t>(model.hidden_units())) {
    throw Error("frame code " + std::to_string(code.frame_index) +
                " does not match the model dimensions");
  }
  std::vector<double> head(code.w2.begin(), code.w2.end());
  const DenseNet net = DenseNet::from(model, head, code.output_bias);

  Frame out;
  out.index = code.frame_index;
  out.domain = code.domain;
  out.valid = n;
  out.values.resize(n);
  for (std::size_t j = 0; j < l; ++j) out.values[j] = code.seed[j];
  std::vector<double> x(l), z(model.hidden_units());
  for (std::size_t k = l; k < n; ++k) {
    for (std::size_t j = 0; j < l; ++j) x[j] = out.values[k - 1 - j];
    const double y = net.predict(x.data(), z.data());
    if (!std::isfinite(y)) {
      throw Error("unstable free run in frame " + std::to_string(code.frame_index));
    }
    out.values[k] = y;
  }
  return out;
}

std::vector<double> predict_teacher_forced(const MappingModel& model,
                                           std::span<const float> w2,
                                           double output_bias,
                                           const TrainingSet& set) {
  std::vector<double> head(w2.begin(), w2.end());
  check_dims(model, head.size(), static_cast<std::size_t>(model.pred_window));
  const DenseNet net = DenseNet::from(model, head, output_bias);
  std::vector<double> out(set.size()), z(model.hidden_units());
  for (std::size_t k = 0; k < set.size(); ++k) {
    out[k] = net.predict(set.inputs[k].data(), z.data());
  }
  return out;
}

OutputGradient output_gradient(const MappingModel& model,
                               std::span<const double> w2, double output_bias,
                               const TrainingSet& set) {
  check_dims(model, w2.size(), static_cast<std::size_t>(model.pred_window));
  const DenseNet net = DenseNet::from(model, w2, output_bias);
  OutputGradient g;
  g.w2.assign(w2.size(), 0.0);
  std::vector<double> z(net.hidden);
  for (std::size_t k = 0; k < set.size(); ++k) {
    const double e = set.targets[k] - net.predict(set.inputs[k].data(), z.data());
    for (int i = 0; i < net.hidden; ++i) g.w2[i] -= e * z[i];
    g.bias -= e;
  }
  return g;
}

GradientCheckReport gradient_check(const MappingModel& model,
                                   std::span<const double> w2,
                                   double output_bias, const TrainingSet& set,
                                   double epsilon) {
  check_dims(model, w2.size(), static_cast<std::size_t>(model.pred_window));
  const DenseNet base = DenseNet::from(model, w2, output_bias);
  const int h = base.hidden;
  const int l = base.inputs;

  // Analytic full back-propagation.
  std::vector<double> g_w1(base.w1.size(), 0.0), g_b1(h, 0.0), g_w2(h, 0.0);
  double g_b2 = 0.0;
  std::vector<double> z(h);
  for (std::size_t k = 0; k < set.size(); ++k) {
    const double* x = set.inputs[k].data();
    const double e = set.targets[k] - base.predict(x, z.data());
    g_b2 -= e;
    for (int i = 0; i < h; ++i) {
      g_w2[i] -= e * z[i];
      const double delta = -e * base.w2[i] * (1.0 - z[i] * z[i]);
      g_b1[i] += delta;
      for (int j = 0; j < l; ++j) g_w1[static_cast<std::size_t>(i) * l + j] += delta * x[j];
    }
  }

  const auto central = [&](auto&& perturb) {
    DenseNet plus = base, minus = base;
    perturb(plus, epsilon);
    perturb(minus, -epsilon);
    return (plus.total_loss(set) - minus.total_loss(set)) / (2.0 * epsilon);
  };

  GradientCheckReport report;
  const OutputGradient coding = output_gradient(model, w2, output_bias, set);
  for (int i = 0; i < h; ++i) {
    const double n = central([i](DenseNet& net, double d) { net.w2[i] += d; });
    report.coding = std::max(report.coding, relative_error(coding.w2[i], n));
    report.mapping = std::max(report.mapping, relative_error(g_w2[i], n));
  }
  const double nb2 = central([](DenseNet& net, double d) { net.b2 += d; });
  report.coding = std::max(report.coding, relative_error(coding.bias, nb2));
  report.mapping = std::max(report.mapping, relative_error(g_b2, nb2));
  for (std::size_t idx = 0; idx < g_w1.size(); ++idx) {
    const double n = central([idx](DenseNet& net, double d) { net.w1[idx] += d; });
    report.mapping = std::max(report.mapping, relative_error(g_w1[idx], n));
  }
  for (int i = 0; i < h; ++i) {
    const double n = central([i](DenseNet& net, double d) { net.b1[i] += d; });
    report.mapping = std::max(report.mapping, relative_error(g_b1[i], n));
  }
  return report;
}

}  // namespace fnpc
