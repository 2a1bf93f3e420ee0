#include "fnpc/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fnpc/error.h"
#include "json.hpp"

namespace fnpc {

namespace {

void require_equal_lengths(std::span<const double> a, std::span<const double> b,
                           const char* what) {
  if (a.size() != b.size()) {
    throw Error(std::string(what) + ": length mismatch (" +
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

// Power spectrum |X(k)|^2 for k in [0, bins) of the zero-padded `fft_len`
// point DFT, computed directly.
class DirectDft {
 public:
  explicit DirectDft(std::size_t fft_len) : n_(fft_len), cos_(fft_len), sin_(fft_len) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n_;
      cos_[i] = std::cos(phase);
      sin_[i] = std::sin(phase);
    }
  }

  std::vector<double> power(std::span<const double> x, std::size_t bins) const {
    std::vector<double> out(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      std::size_t idx = 0;
      for (std::size_t t = 0; t < x.size(); ++t) {
        re += x[t] * cos_[idx];
        im -= x[t] * sin_[idx];
        idx += k;
        if (idx >= n_) idx -= n_;
      }
      out[k] = re * re + im * im;
    }
    return out;
  }

 private:
  std::size_t n_;
  std::vector<double> cos_, sin_;
};

// Full frames only, each multiplied by a Hamming window.
std::vector<std::vector<double>> analysis_frames(std::span<const double> x,
                                                 const SpectralOptions& opt) {
  if (opt.frame == 0 || opt.hop == 0) throw Error("frame and hop must be positive");
  std::vector<std::vector<double>> frames;
  if (x.size() < opt.frame) return frames;
  const std::vector<double> window = hamming_window(opt.frame);
  for (std::size_t off = 0; off + opt.frame <= x.size(); off += opt.hop) {
    std::vector<double> f(opt.frame);
    for (std::size_t i = 0; i < opt.frame; ++i) f[i] = x[off + i] * window[i];
    frames.push_back(std::move(f));
  }
  return frames;
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// Klatt critical bands (Hz).
constexpr std::array<double, 25> kBandCenter = {
    50.0000,  120.000, 190.000, 260.000, 330.000, 400.000, 470.000,
    540.000,  617.372, 703.378, 798.717, 904.128, 1020.38, 1148.30,
    1288.72,  1442.54, 1610.70, 1794.16, 1993.93, 2211.08, 2446.71,
    2701.97,  2978.04, 3276.17, 3597.63};
constexpr std::array<double, 25> kBandWidth = {
    70.0000, 70.0000, 70.0000, 70.0000, 70.0000, 70.0000, 70.0000,
    77.3724, 86.0056, 95.3398, 105.411, 116.256, 127.914, 140.423,
    153.823, 168.154, 183.457, 199.776, 217.153, 235.631, 255.255,
    276.072, 298.126, 321.465, 346.136};
constexpr double kMaxWeight = 20.0;     // K_max
constexpr double kLocMaxWeight = 1.0;   // K_locmax

// Triangular band filters over `bins` DFT bins spanning 0..fs/2, each scaled
// by (narrowest bandwidth / own bandwidth).
std::vector<std::vector<double>> band_filters(std::size_t fft_len, int sample_rate) {
  const std::size_t bins = fft_len / 2;
  const double hz_per_bin = static_cast<double>(sample_rate) / fft_len;
  std::vector<std::vector<double>> filters(kBandCenter.size(), std::vector<double>(bins, 0.0));
  for (std::size_t b = 0; b < kBandCenter.size(); ++b) {
    const double gain = kBandWidth[0] / kBandWidth[b];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = k * hz_per_bin;
      const double w = 1.0 - std::abs(f - kBandCenter[b]) / kBandWidth[b];
      if (w > 0.0) filters[b][k] = gain * w;
    }
  }
  return filters;
}

std::vector<double> band_energy_db(const std::vector<double>& power,
                                   const std::vector<std::vector<double>>& filters) {
  std::vector<double> out(filters.size());
  for (std::size_t b = 0; b < filters.size(); ++b) {
    double e = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) e += power[k] * filters[b][k];
    out[b] = 10.0 * std::log10(std::max(e, 1e-10));
  }
  return out;
}

// Per-band weights from proximity to the nearest local peak (searched along
// the slope direction) and to the global maximum.
std::vector<double> slope_weights(const std::vector<double>& e,
                                  const std::vector<double>& slope) {
  const std::size_t nb = e.size();
  const double global_max = *std::max_element(e.begin(), e.end());
  std::vector<double> w(nb - 1);
  for (std::size_t i = 0; i + 1 < nb; ++i) {
    double local_peak;
    if (slope[i] > 0.0) {
      std::size_t n = i;
      while (n < nb - 1 && slope[n] > 0.0) ++n;
      local_peak = e[n];
    } else {
      std::ptrdiff_t n = static_cast<std::ptrdiff_t>(i);
      while (n >= 0 && slope[n] <= 0.0) --n;
      local_peak = e[n + 1];
    }
    const double w_max = kMaxWeight / (kMaxWeight + global_max - e[i]);
    const double w_loc = kLocMaxWeight / (kLocMaxWeight + local_peak - e[i]);
    w[i] = w_max * w_loc;
  }
  return w;
}

}  // namespace

SegSnr segsnr(std::span<const double> reference, std::span<const double> test,
              std::size_t seg_len) {
  require_equal_lengths(reference, test, "segsnr");
  if (seg_len == 0 || reference.size() < seg_len) {
    throw Error("segsnr: signal shorter than one segment");
  }
  SegSnr out;
  double sum = 0.0;
  for (std::size_t off = 0; off + seg_len <= reference.size(); off += seg_len) {
    double s = 0.0, e = 0.0;
    for (std::size_t i = off; i < off + seg_len; ++i) {
      s += reference[i] * reference[i];
      const double d = reference[i] - test[i];
      e += d * d;
    }
    if (s <= 0.0) continue;
    const double db = e > 0.0 ? 10.0 * std::log10(s / e) : kSegSnrCeilingDb;
    const double clamped = std::clamp(db, kSegSnrFloorDb, kSegSnrCeilingDb);
    out.per_segment.push_back(clamped);
    sum += clamped;
  }
  if (out.per_segment.empty()) throw Error("segsnr: reference is silent");
  out.mean_db = sum / static_cast<double>(out.per_segment.size());
  return out;
}

std::vector<double> autocorrelation(std::span<const double> x, int order) {
  std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
  for (int lag = 0; lag <= order; ++lag) {
    double s = 0.0;
    for (std::size_t n = static_cast<std::size_t>(lag); n < x.size(); ++n) s += x[n] * x[n - lag];
    r[lag] = s;
  }
  return r;
}

LpcCoeffs levinson_durbin(std::span<const double> r, int order) {
  if (order < 0 || r.size() < static_cast<std::size_t>(order) + 1) {
    throw Error("levinson_durbin: need order+1 autocorrelation lags");
  }
  if (!(r[0] > 0.0)) throw Error("degenerate autocorrelation");
  LpcCoeffs out;
  out.order = order;
  out.a.assign(static_cast<std::size_t>(order) + 1, 0.0);
  out.a[0] = 1.0;
  double err = r[0];
  std::vector<double> prev(out.a.size());
  for (int i = 1; i <= order; ++i) {
    double acc = r[i];
    for (int j = 1; j < i; ++j) acc += out.a[j] * r[i - j];
    const double k = -acc / err;
    if (!(std::abs(k) < 1.0)) {
      throw Error("degenerate autocorrelation (reflection coefficient " +
                  std::to_string(k) + " at order " + std::to_string(i) + ")");
    }
    prev = out.a;
    for (int j = 1; j < i; ++j) out.a[j] = prev[j] + k * prev[i - j];
    out.a[i] = k;
    err *= (1.0 - k * k);
  }
  out.error = err;
  return out;
}

LpcCoeffs lpc(std::span<const double> segment, int order) {
  if (order < 0 || segment.size() <= static_cast<std::size_t>(order)) {
    throw Error("lpc: segment must be longer than the order");
  }
  return levinson_durbin(autocorrelation(segment, order), order);
}

double llr(std::span<const double> reference, std::span<const double> test,
           const SpectralOptions& opt) {
  require_equal_lengths(reference, test, "llr");
  const auto ref_frames = analysis_frames(reference, opt);
  const auto test_frames = analysis_frames(test, opt);
  const int p = opt.lpc_order;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < ref_frames.size(); ++f) {
    const std::vector<double> rr = autocorrelation(ref_frames[f], p);
    const std::vector<double> rt = autocorrelation(test_frames[f], p);
    LpcCoeffs ar, at;
    try {
      ar = levinson_durbin(rr, p);
      at = levinson_durbin(rt, p);
    } catch (const Error&) {
      continue;
    }
    // a R_ref a^T with R_ref the Toeplitz autocorrelation matrix.
    const auto quad = [&](const std::vector<double>& a) {
      double q = 0.0;
      for (int i = 0; i <= p; ++i)
        for (int j = 0; j <= p; ++j) q += a[i] * rr[std::abs(i - j)] * a[j];
      return q;
    };
    const double num = quad(at.a);
    const double den = quad(ar.a);
    if (!(den > 0.0) || !(num > 0.0)) continue;
    sum += std::clamp(std::log(num / den), 0.0, 2.0);
    ++used;
  }
  if (used == 0) throw Error("llr: every frame is degenerate");
  return sum / static_cast<double>(used);
}

double wss(std::span<const double> reference, std::span<const double> test,
           const SpectralOptions& opt) {
  require_equal_lengths(reference, test, "wss");
  const auto ref_frames = analysis_frames(reference, opt);
  const auto test_frames = analysis_frames(test, opt);
  const std::size_t fft_len = 2 * opt.frame;
  const DirectDft dft(fft_len);
  const auto filters = band_filters(fft_len, opt.sample_rate);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < ref_frames.size(); ++f) {
    if (energy(ref_frames[f]) <= 0.0 || energy(test_frames[f]) <= 0.0) continue;
    const auto er = band_energy_db(dft.power(ref_frames[f], fft_len / 2), filters);
    const auto et = band_energy_db(dft.power(test_frames[f], fft_len / 2), filters);
    std::vector<double> sr(er.size() - 1), st(et.size() - 1);
    for (std::size_t i = 0; i + 1 < er.size(); ++i) {
      sr[i] = er[i + 1] - er[i];
      st[i] = et[i + 1] - et[i];
    }
    const auto wr = slope_weights(er, sr);
    const auto wt = slope_weights(et, st);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sr.size(); ++i) {
      const double w = 0.5 * (wr[i] + wt[i]);
      const double d = sr[i] - st[i];
      num += w * d * d;
      den += w;
    }
    sum += num / den;
    ++used;
  }
  if (used == 0) throw Error("wss: every frame is degenerate");
  return sum / static_cast<double>(used);
}

std::string QualityReport::to_json() const {
  nlohmann::ordered_json j;
  j["segsnr_db"] = segsnr_db;
  j["llr"] = llr;
  j["wss"] = wss;
  j["frames"] = per_frame_segsnr;
  return j.dump(2);
}

QualityReport evaluate(const Signal& reference, const Signal& test,
                       const SpectralOptions& opt) {
  QualityReport report;
  const SegSnr s = segsnr(reference.samples, test.samples, opt.frame);
  report.segsnr_db = s.mean_db;
  report.per_frame_segsnr = s.per_segment;
  report.llr = llr(reference.samples, test.samples, opt);
  report.wss = wss(reference.samples, test.samples, opt);
  return report;
}

Spectrogram spectrogram(const Signal& signal, std::size_t frame,
                        std::size_t hop) {
  WindowSpec spec{static_cast<int>(frame), static_cast<int>(hop)};
  const std::vector<Frame> frames = frame_signal(signal, spec);
  const std::size_t bins = frame / 2 + 1;
  const DirectDft dft(frame);
  Spectrogram out(bins, std::vector<double>(frames.size()));
  for (std::size_t c = 0; c < frames.size(); ++c) {
    const std::vector<double> p = dft.power(frames[c].values, bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const double db = p[k] > 0.0 ? 10.0 * std::log10(p[k]) : kSpectrogramFloorDb;
      out[k][c] = std::max(db, kSpectrogramFloorDb);
    }
  }
  return out;
}

std::string spectrogram_csv(const Spectrogram& spec) {
  std::ostringstream os;
  os.precision(10);
  const std::size_t cols = spec.empty() ? 0 : spec.front().size();
  for (std::size_t c = 0; c < cols; ++c) os << (c ? "," : "") << c;
  os << '\n';
  for (const auto& row : spec) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
  return os.str();
}

}  // namespace fnpc
