#include "synth_speech.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "fnpc/random.h"

namespace fnpc::testing {

namespace {

constexpr double kPi = std::numbers::pi;

// Second-order digital resonator with time-varying centre and bandwidth.
class Resonator {
 public:
  double step(double x, double freq, double bw, double fs) {
    const double c = -std::exp(-2.0 * kPi * bw / fs);
    const double b = 2.0 * std::exp(-kPi * bw / fs) * std::cos(2.0 * kPi * freq / fs);
    const double a = 1.0 - b - c;
    const double y = a * x + b * y1_ + c * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double y1_ = 0.0, y2_ = 0.0;
};

struct Vowel {
  double f1, f2, f3;
};

constexpr std::array<Vowel, 6> kVowels = {{{730, 1090, 2440},
                                           {270, 2290, 3010},
                                           {300, 870, 2240},
                                           {530, 1840, 2480},
                                           {570, 840, 2410},
                                           {660, 1720, 2410}}};

enum class Kind { kSilence, kVowel, kPlosive, kFricative, kNasal };

// Targets for one phone; the synthesizer glides between consecutive targets.
struct Segment {
  Kind kind = Kind::kSilence;
  double seconds = 0.1;
  double f1 = 500, f2 = 1500, f3 = 2500;
  double voicing = 0.0;   // amplitude of the glottal source
  double frication = 0.0; // amplitude of the noise source
  double noise_freq = 4000, noise_bw = 1500;
  double burst_freq = 0.0;  // plosive release band, 0 when not a plosive
};

std::vector<Segment> plan(Rng& rng, double seconds, double scale) {
  std::vector<Segment> out;
  double t = 0.0;
  Segment lead;
  lead.seconds = 0.08;
  out.push_back(lead);
  t += lead.seconds;
  while (t < seconds) {
    const int syllables = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < syllables && t < seconds; ++s) {
      const Vowel v = kVowels[rng.below(kVowels.size())];
      const double r = rng.uniform();
      Segment c;
      if (r < 0.45) {
        // Voiced plosive: closure with a voice bar, then release into the vowel.
        const int which = static_cast<int>(rng.below(3));  // b, d, g
        const double locus[3] = {800, 1700, 2300};
        c.kind = Kind::kPlosive;
        c.seconds = rng.uniform(0.05, 0.08);
        c.f1 = 200 * scale;
        c.f2 = locus[which] * scale;
        c.f3 = 2500 * scale;
        c.voicing = 0.08;
        c.burst_freq = (which == 0 ? 900 : which == 1 ? 3500 : 2000) * scale;
      } else if (r < 0.7) {
        c.kind = Kind::kFricative;
        c.seconds = rng.uniform(0.07, 0.12);
        c.f1 = 400 * scale;
        c.f2 = 1600 * scale;
        c.f3 = 2600 * scale;
        c.frication = rng.uniform(0.15, 0.35);
        c.noise_freq = rng.uniform(3000, 6000);
        c.noise_bw = rng.uniform(800, 2000);
      } else {
        c.kind = Kind::kNasal;
        c.seconds = rng.uniform(0.05, 0.09);
        c.f1 = 250 * scale;
        c.f2 = 1100 * scale;
        c.f3 = 2300 * scale;
        c.voicing = 0.35;
      }
      out.push_back(c);
      Segment vowel;
      vowel.kind = Kind::kVowel;
      vowel.seconds = rng.uniform(0.11, 0.22);
      vowel.f1 = v.f1 * scale;
      vowel.f2 = v.f2 * scale;
      vowel.f3 = v.f3 * scale;
      vowel.voicing = 1.0;
      out.push_back(vowel);
      t += c.seconds + vowel.seconds;
    }
    Segment pause;
    pause.seconds = rng.uniform(0.06, 0.2);
    out.push_back(pause);
    t += pause.seconds;
  }
  return out;
}

}  // namespace

Signal synthesize_utterance(std::uint64_t seed, double seconds,
                            int sample_rate) {
  Rng rng(mix_seed(seed, 77));
  const double fs = sample_rate;
  const double scale = rng.uniform(0.9, 1.15);  // vocal tract length
  const double f0_base = rng.uniform(95.0, 210.0);
  const std::vector<Segment> segments = plan(rng, seconds, scale);

  const auto total = static_cast<std::size_t>(seconds * fs);
  Signal out;
  out.sample_rate = sample_rate;
  out.samples.assign(total, 0.0);

  Resonator r1, r2, r3, r4, r5, nasal_zero, fric, burst;
  double f1 = 500, f2 = 1500, f3 = 2500, voicing = 0, frication = 0;
  double noise_freq = 4000, noise_bw = 1500;
  double phase = 0.0;
  double glottal1 = 0.0, glottal2 = 0.0, prev = 0.0;
  const double smooth = 1.0 - std::exp(-1.0 / (0.012 * fs));  // ~12 ms glides
  const double amp_smooth = 1.0 - std::exp(-1.0 / (0.004 * fs));

  std::size_t n = 0;
  for (const Segment& seg : segments) {
    const auto len = static_cast<std::size_t>(seg.seconds * fs);
    for (std::size_t i = 0; i < len && n < total; ++i, ++n) {
      f1 += smooth * (seg.f1 - f1);
      f2 += smooth * (seg.f2 - f2);
      f3 += smooth * (seg.f3 - f3);
      voicing += amp_smooth * (seg.voicing - voicing);
      frication += amp_smooth * (seg.frication - frication);
      noise_freq += smooth * (seg.noise_freq - noise_freq);
      noise_bw += smooth * (seg.noise_bw - noise_bw);

      // Glottal source: pulse train with slow pitch drift and jitter, shaped
      // by two one-pole low-passes.
      const double t = static_cast<double>(n) / fs;
      const double f0 = f0_base * (1.0 + 0.08 * std::sin(2 * kPi * 0.7 * t) +
                                   0.01 * rng.gaussian());
      phase += f0 / fs;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      const double lp = std::exp(-2 * kPi * 150.0 / fs);
      glottal1 = (1 - lp) * pulse * 40.0 + lp * glottal1;
      glottal2 = (1 - lp) * glottal1 + lp * glottal2;
      const double aspiration = 0.02 * rng.gaussian();
      double source = voicing * (glottal2 + aspiration * glottal2 * 5.0);

      double y = r1.step(source, f1, 60 + 0.05 * f1, fs);
      y = r2.step(y, f2, 80 + 0.04 * f2, fs);
      y = r3.step(y, f3, 120, fs);
      y = r4.step(y, 3500 * scale, 200, fs);
      y = r5.step(y, 4500 * scale, 250, fs);
      if (seg.kind == Kind::kNasal) y = 0.5 * (y + nasal_zero.step(y, 1000, 300, fs));

      double noise = frication * fric.step(rng.gaussian(), noise_freq, noise_bw, fs);
      if (seg.burst_freq > 0.0 && i + static_cast<std::size_t>(0.012 * fs) >= len) {
        noise += 0.6 * burst.step(rng.gaussian(), seg.burst_freq, 800, fs);
      }
      const double radiated = y - 0.9 * prev;  // lip radiation
      prev = y;
      out.samples[n] = radiated + noise + 1e-4 * rng.gaussian();
    }
  }
  for (; n < total; ++n) out.samples[n] = 1e-4 * rng.gaussian();

  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  for (double& v : out.samples) v *= 0.5 / peak;
  return out;
}

Signal sinusoid(double freq_hz, std::size_t samples, int sample_rate,
                double amplitude) {
  Signal s;
  s.sample_rate = sample_rate;
  s.samples.resize(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    s.samples[n] = amplitude * std::sin(2 * kPi * freq_hz * n / sample_rate);
  }
  return s;
}

std::vector<double> ar2_process(double c1, double c2, std::size_t samples,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(samples + 500, 0.0);
  for (std::size_t n = 2; n < x.size(); ++n) {
    x[n] = c1 * x[n - 1] + c2 * x[n - 2] + rng.gaussian();
  }
  return {x.begin() + 500, x.end()};  // drop the start-up transient
}

std::vector<double> white_noise(std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(samples);
  for (double& v : x) v = rng.gaussian();
  return x;
}

}  // namespace fnpc::testing
