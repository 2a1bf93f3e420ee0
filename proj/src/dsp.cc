#include "fnpc/dsp.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "fnpc/error.h"
#include "fnpc/random.h"

namespace fnpc {

std::string_view domain_name(Domain domain) {
  return domain == Domain::kDct ? "dct" : "time";
}

Domain parse_domain(std::string_view name) {
  if (name == "time") return Domain::kTime;
  if (name == "dct") return Domain::kDct;
  throw Error("unknown domain '" + std::string(name) + "' (expected time|dct)");
}

void WindowSpec::validate() const {
  if (length <= 0 || length % 2 != 0) {
    throw Error("window length must be positive and even, got " +
                std::to_string(length));
  }
  if (hop <= 0 || hop > length || length % hop != 0) {
    throw Error("hop " + std::to_string(hop) +
                " must divide the window length " + std::to_string(length));
  }
}

std::vector<double> hamming_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / denom);
  }
  return w;
}

std::size_t frame_count(std::size_t length, const WindowSpec& spec) {
  const auto hop = static_cast<std::size_t>(spec.hop);
  return (length + hop - 1) / hop;
}

std::vector<Frame> frame_signal(const Signal& signal, const WindowSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.length);
  const auto hop = static_cast<std::size_t>(spec.hop);
  const auto& x = signal.samples;
  if (x.size() < n) {
    throw Error("signal too short: " + std::to_string(x.size()) +
                " samples, frame length is " + std::to_string(n));
  }
  const std::vector<double> window = hamming_window(n);
  const std::size_t count = frame_count(x.size(), spec);
  std::vector<Frame> frames(count);
  for (std::size_t f = 0; f < count; ++f) {
    const std::size_t offset = f * hop;
    Frame& frame = frames[f];
    frame.index = f;
    frame.domain = Domain::kTime;
    frame.valid = std::min(n, x.size() - offset);
    frame.values.assign(n, 0.0);
    for (std::size_t i = 0; i < frame.valid; ++i) {
      frame.values[i] = x[offset + i] * window[i];
    }
  }
  return frames;
}

Signal overlap_add(std::span<const Frame> frames, const WindowSpec& spec,
                   int sample_rate) {
  spec.validate();
  if (frames.empty()) throw Error("overlap_add: no frames");
  const auto n = static_cast<std::size_t>(spec.length);
  const auto hop = static_cast<std::size_t>(spec.hop);
  const std::vector<double> window = hamming_window(n);

  const std::size_t total = (frames.size() - 1) * hop + n;
  std::vector<double> acc(total, 0.0);
  std::vector<double> weight(total, 0.0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const Frame& frame = frames[f];
    if (frame.domain != Domain::kTime) {
      throw Error("overlap_add: frame " + std::to_string(f) +
                  " is not in the time domain");
    }
    if (frame.values.size() != n) {
      throw Error("overlap_add: frame " + std::to_string(f) + " has length " +
                  std::to_string(frame.values.size()) + ", expected " +
                  std::to_string(n));
    }
    const std::size_t offset = f * hop;
    for (std::size_t i = 0; i < n; ++i) {
      acc[offset + i] += frame.values[i];
      weight[offset + i] += window[i];
    }
  }
  Signal out;
  out.sample_rate = sample_rate;
  out.samples.resize(total);
  for (std::size_t t = 0; t < total; ++t) {
    out.samples[t] = acc[t] / std::max(weight[t], 1e-8);
  }
  return out;
}

namespace {

std::vector<double> build_dct_matrix(std::size_t n) {
  std::vector<double> g(n * n);
  const double nn = static_cast<double>(n);
  const double c0 = 1.0 / std::sqrt(nn);
  const double ck = std::sqrt(2.0 / nn);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = (k == 0) ? c0 : ck;
    for (std::size_t i = 0; i < n; ++i) {
      // Reduce the argument modulo 4N before the cosine to keep it small.
      const std::size_t arg = ((2 * i + 1) * k) % (4 * n);
      g[k * n + i] =
          scale * std::cos(std::numbers::pi * static_cast<double>(arg) /
                           (2.0 * nn));
    }
  }
  return g;
}

void check_length(std::size_t got, std::size_t want) {
  if (got != want) {
    throw Error("DCT length mismatch: " + std::to_string(got) + " vs " +
                std::to_string(want));
  }
}

}  // namespace

const std::vector<double>& dct_matrix(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<const std::vector<double>>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<const std::vector<double>>(build_dct_matrix(n));
  return *slot;
}

void dct_forward(std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size();
  check_length(out.size(), n);
  const std::vector<double>& g = dct_matrix(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = &g[k * n];
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += row[i] * in[i];
    out[k] = sum;
  }
}

void dct_inverse(std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size();
  check_length(out.size(), n);
  const std::vector<double>& g = dct_matrix(n);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = &g[k * n];
    const double c = in[k];
    for (std::size_t i = 0; i < n; ++i) out[i] += row[i] * c;
  }
}

Frame dct_forward(const Frame& frame) {
  if (frame.domain != Domain::kTime) throw Error("dct_forward: frame is not in the time domain");
  Frame out = frame;
  out.domain = Domain::kDct;
  dct_forward(frame.values, out.values);
  return out;
}

Frame dct_inverse(const Frame& frame) {
  if (frame.domain != Domain::kDct) throw Error("dct_inverse: frame is not in the DCT domain");
  Frame out = frame;
  out.domain = Domain::kTime;
  dct_inverse(frame.values, out.values);
  return out;
}

NormStats compute_norm_stats(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw Error("normalization needs at least 2 samples");
  }
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(samples.size());
  if (!(var > 0.0)) throw Error("zero variance");
  return {mean, std::sqrt(var)};
}

void normalize_in_place(std::span<double> values, const NormStats& stats) {
  for (double& v : values) v = (v - stats.mean) / stats.std_dev;
}

void denormalize_in_place(std::span<double> values, const NormStats& stats) {
  for (double& v : values) v = v * stats.std_dev + stats.mean;
}

Signal normalize(const Signal& signal, const NormStats& stats) {
  Signal out = signal;
  normalize_in_place(out.samples, stats);
  return out;
}

Signal denormalize(const Signal& signal, const NormStats& stats) {
  Signal out = signal;
  denormalize_in_place(out.samples, stats);
  return out;
}

Signal add_awgn(const Signal& signal, double snr_db, std::uint64_t seed) {
  const auto& x = signal.samples;
  double signal_power = 0.0;
  for (double v : x) signal_power += v * v;
  if (x.empty() || !(signal_power > 0.0)) {
    throw Error("add_awgn: signal has zero power");
  }
  Rng rng(seed);
  std::vector<double> noise(x.size());
  double noise_power = 0.0;
  for (double& v : noise) {
    v = rng.gaussian();
    noise_power += v * v;
  }
  // Scale the realized noise, not its expectation, so the SNR is exact.
  const double target = signal_power / std::pow(10.0, snr_db / 10.0);
  const double gain = std::sqrt(target / noise_power);
  Signal out = signal;
  for (std::size_t i = 0; i < x.size(); ++i) out.samples[i] += gain * noise[i];
  return out;
}

double global_snr_db(std::span<const double> reference,
                     std::span<const double> test) {
  if (reference.size() != test.size()) throw Error("global_snr_db: length mismatch");
  double s = 0.0, e = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    s += reference[i] * reference[i];
    const double d = reference[i] - test[i];
    e += d * d;
  }
  return 10.0 * std::log10(s / e);
}

}  // namespace fnpc
