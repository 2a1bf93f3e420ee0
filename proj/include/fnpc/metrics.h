#ifndef FNPC_METRICS_H_
#define FNPC_METRICS_H_

// Objective quality measures: segmental SNR, LPC log-likelihood ratio and
// Klatt's weighted spectral slope, plus a dB spectrogram.

#include <cstddef>
#include <string>
#include <vector>

#include "fnpc/dsp.h"

namespace fnpc {

inline constexpr double kSegSnrFloorDb = -10.0;
inline constexpr double kSegSnrCeilingDb = 35.0;
inline constexpr double kSpectrogramFloorDb = -120.0;

struct SegSnr {
  double mean_db = 0.0;
  std::vector<double> per_segment;
};

// Non-overlapping segments of `seg_len`; segments with zero reference energy
// are left out of the mean and of `per_segment`.
SegSnr segsnr(std::span<const double> reference, std::span<const double> test,
              std::size_t seg_len = 256);

struct LpcCoeffs {
  int order = 0;
  std::vector<double> a;  // a[0] == 1; prediction error filter 1 + sum a_i z^-i
  double error = 0.0;     // final prediction error power
};

// Biased autocorrelation r[0..order].
std::vector<double> autocorrelation(std::span<const double> x, int order);

// Levinson-Durbin on the autocorrelation sequence.
LpcCoeffs levinson_durbin(std::span<const double> r, int order);

// Autocorrelation method on the segment as given (no extra window).
LpcCoeffs lpc(std::span<const double> segment, int order);

struct SpectralOptions {
  std::size_t frame = 256;
  std::size_t hop = 128;
  int lpc_order = 10;
  int sample_rate = 16000;
};

double llr(std::span<const double> reference, std::span<const double> test,
           const SpectralOptions& opt = {});

double wss(std::span<const double> reference, std::span<const double> test,
           const SpectralOptions& opt = {});

struct QualityReport {
  double segsnr_db = 0.0;
  double llr = 0.0;
  double wss = 0.0;
  std::vector<double> per_frame_segsnr;

  // {"segsnr_db", "llr", "wss", "frames"} in that order.
  std::string to_json() const;
};

QualityReport evaluate(const Signal& reference, const Signal& test,
                       const SpectralOptions& opt = {});

// rows = bins 0..frame/2, columns = frames (frame_signal framing).
using Spectrogram = std::vector<std::vector<double>>;

Spectrogram spectrogram(const Signal& signal, std::size_t frame = 256,
                        std::size_t hop = 128);

// Header row of frame indices, then one row per frequency bin.
std::string spectrogram_csv(const Spectrogram& spec);

}  // namespace fnpc

#endif  // FNPC_METRICS_H_
