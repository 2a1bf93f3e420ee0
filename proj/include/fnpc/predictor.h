#ifndef FNPC_PREDICTOR_H_
#define FNPC_PREDICTOR_H_

// Two-layer nonlinear predictor. The hidden layer (tanh) is trained once over
// a corpus and then frozen; the linear output neuron is re-fitted for every
// frame and its weights become that frame's code.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fnpc/dsp.h"

namespace fnpc {

struct PredictorConfig {
  int pred_window = 40;  // L
  int num_codes = 16;    // M; the hidden layer has M - 1 units
  double map_learning_rate = 0.01;
  double code_learning_rate = 0.05;
  int map_epochs = 20;
  int code_iterations = 200;
  std::uint64_t rng_seed = 1;
  // When positive, mapping-phase pairs never reach back across a multiple of
  // this length, e.g. the frame length to keep DCT windows inside one frame.
  int map_block = 0;

  int hidden_units() const { return num_codes - 1; }
  void validate() const;
};

// Frozen mapping layer plus everything needed to reproduce the framing the
// layer was trained for. Weights are kept in single precision because that is
// what the model file stores.
struct MappingModel {
  Domain domain = Domain::kTime;
  WindowSpec window;
  int sample_rate = 16000;
  int pred_window = 40;
  int num_codes = 16;
  NormStats norm;
  std::vector<float> hidden_bias;  // M - 1
  std::vector<float> w1;           // (M - 1) x L, row-major

  int hidden_units() const { return num_codes - 1; }
  float weight(int unit, int tap) const {
    return w1[static_cast<std::size_t>(unit) * pred_window + tap];
  }
  void validate() const;

  friend bool operator==(const MappingModel&, const MappingModel&) = default;
};

struct FrameCode {
  std::uint32_t frame_index = 0;
  Domain domain = Domain::kTime;
  std::vector<float> seed;  // first L normalized frame values
  std::vector<float> w2;    // M - 1 output weights
  float output_bias = 0.0f;

  friend bool operator==(const FrameCode&, const FrameCode&) = default;
};

// Pairs (X_n, y_n) with X_n = [x_{k-1}, ..., x_{k-L}] and y_n = x_k.
struct TrainingSet {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }
};

TrainingSet build_training_set(std::span<const double> frame, int pred_window);
inline TrainingSet build_training_set(const Frame& frame, int pred_window) {
  return build_training_set(frame.values, pred_window);
}

struct ForwardResult {
  double prediction = 0.0;
  std::vector<double> hidden;
  double pre_activation = 0.0;
};

ForwardResult forward(const MappingModel& model, std::span<const float> w2,
                      double output_bias, std::span<const double> input);

// 1/2 sum (y - y_hat)^2.
double loss(std::span<const double> predictions,
            std::span<const double> targets);

// Per-epoch mean online loss, filled by train_mapping when requested.
struct MappingLog {
  std::vector<double> epoch_loss;
};

// Uniform(+-1/sqrt(fan_in)) initial weights of the mapping layer; this is
// exactly what train_mapping starts from for the same config.
MappingModel initial_mapping(const PredictorConfig& cfg, Domain domain,
                             const WindowSpec& window, int sample_rate,
                             const NormStats& norm);

// Target positions of the mapping-phase pairs for a stream of `length`
// samples: every k >= L, minus those whose window crosses a map_block edge.
std::vector<std::uint32_t> mapping_targets(std::size_t length,
                                           const PredictorConfig& cfg);

// Stochastic back-propagation over every sliding (L inputs, 1 target) window
// of the already normalized sample stream. Only the hidden layer survives.
MappingModel train_mapping(std::span<const double> samples,
                           const PredictorConfig& cfg, Domain domain,
                           const WindowSpec& window, int sample_rate,
                           const NormStats& norm, MappingLog* log = nullptr);

struct CodingOptions {
  double learning_rate = 0.05;
  int iterations = 200;
  std::uint64_t seed = 1;
  // Output weights start at Uniform(+-init_scale/sqrt(M-1)), seeded per frame.
  // The default 0 starts from the origin, so descent stays in the row space of
  // the hidden activations and leaves ill-conditioned directions at zero.
  double init_scale = 0.0;

  static CodingOptions from(const PredictorConfig& cfg) {
    return {cfg.code_learning_rate, cfg.code_iterations, cfg.rng_seed, 0.0};
  }
};

// Loss before the first update and after each update.
struct CodingTrace {
  std::vector<double> loss;
  double step = 0.0;  // step size actually used
};

// Full-batch gradient descent on the output neuron with the hidden layer
// frozen. The loss is quadratic in (w2, b2), so the step is capped at the
// reciprocal of an upper bound on the Hessian's largest eigenvalue; that makes
// every iteration non-increasing regardless of the requested learning rate.
FrameCode code_frame(const MappingModel& model, const Frame& frame,
                     const CodingOptions& options, CodingTrace* trace = nullptr);

// Free-run decoder: the seed fills the first L values, every later value is
// predicted from the L values before it.
Frame predict_frame(const MappingModel& model, const FrameCode& code);

// Prediction of every target in `set` with the given head (teacher forcing).
std::vector<double> predict_teacher_forced(const MappingModel& model,
                                           std::span<const float> w2,
                                           double output_bias,
                                           const TrainingSet& set);

struct OutputGradient {
  std::vector<double> w2;
  double bias = 0.0;
};

// Analytic gradient of 1/2 sum e^2 with respect to the output neuron.
OutputGradient output_gradient(const MappingModel& model,
                               std::span<const double> w2, double output_bias,
                               const TrainingSet& set);

struct GradientCheckReport {
  double coding = 0.0;   // output-layer gradient, hidden layer frozen
  double mapping = 0.0;  // full back-propagation through both layers

  double max() const { return coding > mapping ? coding : mapping; }
};

// Max relative error between analytic gradients and central differences with
// step `epsilon`. Components where both values are below 1e-7 are skipped.
GradientCheckReport gradient_check(const MappingModel& model,
                                   std::span<const double> w2,
                                   double output_bias, const TrainingSet& set,
                                   double epsilon);

}  // namespace fnpc

#endif  // FNPC_PREDICTOR_H_
