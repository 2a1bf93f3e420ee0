#ifndef FNPC_CODEC_H_
#define FNPC_CODEC_H_

// Encoder/decoder orchestration and the binary model/stream formats.
//
// Model file (little-endian):
//   "FNPM" | version u16 | domain u8 | N u16 | hop u16 | L u16 | M u16 |
//   sample_rate u32 | mean f64 | std_dev f64 |
//   hidden_bias (M-1) x f32 | w1 (M-1)*L x f32, row-major
//
// Stream file (little-endian):
//   "FNPC" | version u16 | model fingerprint u64 | domain u8 | N u16 |
//   hop u16 | L u16 | M u16 | sample_rate u32 | original_length u64 |
//   frame_count u32 |
//   per frame: index u32 | seed L x f32 | w2 (M-1) x f32 | b2 f32
//
// The seed (first L normalized values of the frame) travels with every code
// so the decoder can start its free run; codes are not quantized.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fnpc/dsp.h"
#include "fnpc/predictor.h"

namespace fnpc {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 35;
inline constexpr std::size_t kStreamHeaderBytes = 39;

struct CodecConfig {
  WindowSpec window;
  Domain domain = Domain::kTime;
  PredictorConfig predictor;
  int sample_rate = 16000;

  void validate() const;
};

struct StreamHeader {
  std::uint64_t model_fingerprint = 0;
  Domain domain = Domain::kTime;
  WindowSpec window;
  int pred_window = 40;
  int num_codes = 16;
  int sample_rate = 16000;
  std::uint64_t original_length = 0;
  std::uint32_t frame_count = 0;

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct EncodedStream {
  StreamHeader header;
  std::vector<FrameCode> records;

  friend bool operator==(const EncodedStream&, const EncodedStream&) = default;
};

// Names of the stages encode/decode ran, in order. Used to check that the
// time and DCT pipelines differ only in the per-frame transform.
using PipelineTrace = std::vector<std::string>;

// normalize with the model's stats -> frame (Hamming, 50%) -> per-frame
// transform (identity | DCT) -> code every frame. Frames are coded on `jobs`
// threads (0 = hardware concurrency); the output does not depend on it.
EncodedStream encode(const Signal& signal, const MappingModel& model,
                     const CodecConfig& cfg, int jobs = 1,
                     PipelineTrace* trace = nullptr);

// Inverse pipeline: free-run each frame -> inverse transform -> overlap-add
// -> denormalize -> truncate to the original length.
Signal decode(const EncodedStream& stream, const MappingModel& model,
              PipelineTrace* trace = nullptr);

std::vector<std::uint8_t> serialize_model(const MappingModel& model);
MappingModel deserialize_model(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_stream(const EncodedStream& stream);
EncodedStream deserialize_stream(const std::vector<std::uint8_t>& bytes);

// FNV-1a 64 over the serialized model.
std::uint64_t model_fingerprint(const MappingModel& model);

// Size of a stream file holding `frames` records for dimensions (L, M).
std::size_t stream_size_bytes(std::size_t frames, int pred_window,
                              int num_codes);

void write_model(const MappingModel& model, const std::filesystem::path& path);
MappingModel read_model(const std::filesystem::path& path);
void write_stream(const EncodedStream& stream,
                  const std::filesystem::path& path);
EncodedStream read_stream(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes);

}  // namespace fnpc

#endif  // FNPC_CODEC_H_
