#ifndef FNPC_TESTS_SUPPORT_SYNTH_SPEECH_H_
#define FNPC_TESTS_SUPPORT_SYNTH_SPEECH_H_

#include <cstdint>
#include <vector>

#include "fnpc/dsp.h"

namespace fnpc::testing {

// Klatt-style cascade formant synthesizer producing speech-like utterances:
// CV syllables with vowels, voiced plosives (/b/ /d/ /g/), fricatives and
// nasals, separated by short pauses. Fully determined by `seed`; different
// seeds also vary the talker (pitch range, vocal tract length).
Signal synthesize_utterance(std::uint64_t seed, double seconds,
                            int sample_rate = 16000);

// Pure tone, amplitude `amplitude`.
Signal sinusoid(double freq_hz, std::size_t samples, int sample_rate = 16000,
                double amplitude = 0.5);

// x[n] = c1 x[n-1] + c2 x[n-2] + w[n], unit-variance Gaussian w.
std::vector<double> ar2_process(double c1, double c2, std::size_t samples,
                                std::uint64_t seed);

std::vector<double> white_noise(std::size_t samples, std::uint64_t seed);

}  // namespace fnpc::testing

#endif  // FNPC_TESTS_SUPPORT_SYNTH_SPEECH_H_
