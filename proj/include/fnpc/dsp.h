#ifndef FNPC_DSP_H_
#define FNPC_DSP_H_

// Signal conditioning: framing, windowing, overlap-add synthesis, the
// orthonormal DCT-II, global normalization and noise injection.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fnpc {

enum class Domain : std::uint8_t { kTime = 0, kDct = 1 };

std::string_view domain_name(Domain domain);
// Accepts "time" or "dct"; throws on anything else.
Domain parse_domain(std::string_view name);

struct Signal {
  std::vector<double> samples;
  int sample_rate = 16000;
};

struct Frame {
  std::vector<double> values;
  std::size_t index = 0;
  Domain domain = Domain::kTime;
  // Number of samples taken from the signal; the rest is zero padding.
  std::size_t valid = 0;
};

struct NormStats {
  double mean = 0.0;
  double std_dev = 1.0;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Hamming analysis window of `length` samples advanced by `hop`.
struct WindowSpec {
  int length = 256;
  int hop = 128;

  void validate() const;

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

// Symmetric Hamming window 0.54 - 0.46 cos(2 pi n / (N - 1)).
std::vector<double> hamming_window(std::size_t length);

// Frames start at 0, hop, 2 hop, ... for every offset inside the signal; the
// trailing segments are zero padded to the full length. Each frame is
// multiplied by the Hamming window.
std::vector<Frame> frame_signal(const Signal& signal, const WindowSpec& spec);

// Number of frames frame_signal produces for `length` samples.
std::size_t frame_count(std::size_t length, const WindowSpec& spec);

// Weighted overlap-add: out[t] = sum frame[t - off] / sum window[t - off],
// with the window sum clamped below at 1e-8. The result spans
// (frames - 1) * hop + length samples.
Signal overlap_add(std::span<const Frame> frames, const WindowSpec& spec,
                   int sample_rate = 16000);

// Orthonormal DCT-II basis, row k holds basis vector k (0-based):
// G[k][n] = c_k cos(pi (2n + 1) k / 2N), c_0 = 1/sqrt(N), c_k = sqrt(2/N).
// Matrices are built once per size and shared.
const std::vector<double>& dct_matrix(std::size_t n);

Frame dct_forward(const Frame& frame);
Frame dct_inverse(const Frame& frame);
void dct_forward(std::span<const double> in, std::span<double> out);
void dct_inverse(std::span<const double> in, std::span<double> out);

// Population mean and standard deviation over every sample.
NormStats compute_norm_stats(std::span<const double> samples);
inline NormStats compute_norm_stats(const Signal& signal) {
  return compute_norm_stats(signal.samples);
}

void normalize_in_place(std::span<double> values, const NormStats& stats);
void denormalize_in_place(std::span<double> values, const NormStats& stats);
Signal normalize(const Signal& signal, const NormStats& stats);
Signal denormalize(const Signal& signal, const NormStats& stats);

// Adds white Gaussian noise scaled so that the whole-signal SNR is exactly
// `snr_db`. The noise sequence depends only on `seed`.
Signal add_awgn(const Signal& signal, double snr_db, std::uint64_t seed);

// 10 log10(sum s^2 / sum (s - t)^2) over the whole signal.
double global_snr_db(std::span<const double> reference,
                     std::span<const double> test);

}  // namespace fnpc

#endif  // FNPC_DSP_H_
