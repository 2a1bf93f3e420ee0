#include "fnpc/codec.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <thread>

#include "fnpc/error.h"

namespace fnpc {

namespace {

constexpr char kModelMagic[4] = {'F', 'N', 'P', 'M'};
constexpr char kStreamMagic[4] = {'F', 'N', 'P', 'C'};

class ByteWriter {
 public:
  void magic(const char (&m)[4]) { bytes_.insert(bytes_.end(), m, m + 4); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, const char* what)
      : bytes_(bytes), what_(what) {}

  void magic(const char (&m)[4]) {
    need(4, "magic");
    if (std::memcmp(&bytes_[pos_], m, 4) != 0) {
      throw Error(std::string(what_) + ": bad magic at offset 0");
    }
    pos_ += 4;
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* field) { return static_cast<std::uint16_t>(get(2, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(get(4, field)); }
  std::uint64_t u64(const char* field) { return get(8, field); }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }

  std::size_t offset() const { return pos_; }
  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw Error(std::string(what_) + ": " + std::to_string(bytes_.size() - pos_) +
                  " trailing bytes at offset " + std::to_string(pos_));
    }
  }
  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw Error(std::string(what_) + ": " + msg + " at offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(std::string(what_) + ": truncated reading " + field +
                  " at offset " + std::to_string(pos_));
    }
  }
  std::uint64_t get(int n, const char* field) {
    need(static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

std::uint16_t narrow16(int v, const char* field) {
  if (v < 0 || v > 0xffff) throw Error(std::string(field) + " does not fit in 16 bits");
  return static_cast<std::uint16_t>(v);
}

Domain read_domain(ByteReader& in) {
  const std::size_t at = in.offset();
  const std::uint8_t d = in.u8("domain");
  if (d > 1) in.fail(at, "unknown domain tag " + std::to_string(d));
  return static_cast<Domain>(d);
}

void read_version(ByteReader& in) {
  const std::size_t at = in.offset();
  const std::uint16_t v = in.u16("version");
  if (v != kFormatVersion) {
    in.fail(at, "version mismatch (file " + std::to_string(v) + ", supported " +
                    std::to_string(kFormatVersion) + ")");
  }
}

void check_model_matches(const MappingModel& model, const StreamHeader& h) {
  if (h.model_fingerprint != model_fingerprint(model) ||
      h.domain != model.domain || h.window.length != model.window.length ||
      h.window.hop != model.window.hop || h.pred_window != model.pred_window ||
      h.num_codes != model.num_codes) {
    throw Error("model/stream mismatch");
  }
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads. The exception of the
// lowest failing index is rethrown so failures are reported deterministically.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void CodecConfig::validate() const {
  window.validate();
  predictor.validate();
  if (predictor.pred_window >= window.length) {
    throw Error("frame length must exceed the prediction window");
  }
  if (sample_rate <= 0) throw Error("sample rate must be positive");
}

EncodedStream encode(const Signal& signal, const MappingModel& model,
                     const CodecConfig& cfg, int jobs, PipelineTrace* trace) {
  cfg.validate();
  model.validate();
  if (cfg.domain != model.domain || cfg.window.length != model.window.length ||
      cfg.window.hop != model.window.hop ||
      cfg.predictor.pred_window != model.pred_window ||
      cfg.predictor.num_codes != model.num_codes) {
    throw Error("codec configuration does not match the mapping model");
  }
  if (signal.sample_rate != model.sample_rate) {
    throw Error("input sample rate " + std::to_string(signal.sample_rate) +
                " differs from the model's " + std::to_string(model.sample_rate));
  }

  const Signal normalized = normalize(signal, model.norm);
  if (trace) trace->push_back("normalize");
  std::vector<Frame> frames = frame_signal(normalized, model.window);
  if (trace) trace->push_back("frame");
  if (model.domain == Domain::kDct) {
    for (Frame& f : frames) f = dct_forward(f);
  }
  if (trace) trace->push_back(model.domain == Domain::kDct ? "transform:dct" : "transform:identity");

  EncodedStream stream;
  stream.header.model_fingerprint = model_fingerprint(model);
  stream.header.domain = model.domain;
  stream.header.window = model.window;
  stream.header.pred_window = model.pred_window;
  stream.header.num_codes = model.num_codes;
  stream.header.sample_rate = model.sample_rate;
  stream.header.original_length = signal.samples.size();
  stream.header.frame_count = static_cast<std::uint32_t>(frames.size());

  const CodingOptions options = CodingOptions::from(cfg.predictor);
  stream.records.resize(frames.size());
  parallel_for(frames.size(), jobs, [&](std::size_t i) {
    stream.records[i] = code_frame(model, frames[i], options);
  });
  if (trace) trace->push_back("code");
  return stream;
}

Signal decode(const EncodedStream& stream, const MappingModel& model,
              PipelineTrace* trace) {
  model.validate();
  check_model_matches(model, stream.header);
  if (stream.records.size() != stream.header.frame_count) {
    throw Error("stream holds " + std::to_string(stream.records.size()) +
                " records but its header declares " +
                std::to_string(stream.header.frame_count));
  }
  if (stream.records.empty()) throw Error("stream has no frames");

  std::vector<Frame> frames(stream.records.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (stream.records[i].frame_index != i) {
      throw Error("stream record " + std::to_string(i) + " carries frame index " +
                  std::to_string(stream.records[i].frame_index));
    }
    frames[i] = predict_frame(model, stream.records[i]);
  }
  if (trace) trace->push_back("code");
  if (model.domain == Domain::kDct) {
    for (Frame& f : frames) f = dct_inverse(f);
  }
  if (trace) trace->push_back(model.domain == Domain::kDct ? "transform:dct" : "transform:identity");
  Signal out = overlap_add(frames, model.window, model.sample_rate);
  if (trace) trace->push_back("frame");
  denormalize_in_place(out.samples, model.norm);
  if (trace) trace->push_back("normalize");
  out.samples.resize(stream.header.original_length, 0.0);
  return out;
}

std::vector<std::uint8_t> serialize_model(const MappingModel& model) {
  model.validate();
  ByteWriter out;
  out.magic(kModelMagic);
  out.u16(kFormatVersion);
  out.u8(static_cast<std::uint8_t>(model.domain));
  out.u16(narrow16(model.window.length, "frame length"));
  out.u16(narrow16(model.window.hop, "hop"));
  out.u16(narrow16(model.pred_window, "prediction window"));
  out.u16(narrow16(model.num_codes, "code count"));
  out.u32(static_cast<std::uint32_t>(model.sample_rate));
  out.f64(model.norm.mean);
  out.f64(model.norm.std_dev);
  for (float v : model.hidden_bias) out.f32(v);
  for (float v : model.w1) out.f32(v);
  return out.take();
}

MappingModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes, "model file");
  in.magic(kModelMagic);
  read_version(in);
  MappingModel model;
  model.domain = read_domain(in);
  model.window.length = in.u16("frame length");
  model.window.hop = in.u16("hop");
  model.pred_window = in.u16("prediction window");
  const std::size_t codes_at = in.offset();
  model.num_codes = in.u16("code count");
  if (model.num_codes < 2) in.fail(codes_at, "code count must be >= 2");
  model.sample_rate = static_cast<int>(in.u32("sample rate"));
  model.norm.mean = in.f64("mean");
  const std::size_t sd_at = in.offset();
  model.norm.std_dev = in.f64("std_dev");
  if (!(model.norm.std_dev > 0.0)) in.fail(sd_at, "non-positive std_dev");
  const auto h = static_cast<std::size_t>(model.hidden_units());
  model.hidden_bias.resize(h);
  for (float& v : model.hidden_bias) v = in.f32("hidden bias");
  model.w1.resize(h * static_cast<std::size_t>(model.pred_window));
  for (float& v : model.w1) v = in.f32("mapping weights");
  in.expect_end();
  model.validate();
  return model;
}

std::vector<std::uint8_t> serialize_stream(const EncodedStream& stream) {
  const StreamHeader& h = stream.header;
  if (stream.records.size() != h.frame_count) {
    throw Error("record count does not match the header frame count");
  }
  ByteWriter out;
  out.magic(kStreamMagic);
  out.u16(kFormatVersion);
  out.u64(h.model_fingerprint);
  out.u8(static_cast<std::uint8_t>(h.domain));
  out.u16(narrow16(h.window.length, "frame length"));
  out.u16(narrow16(h.window.hop, "hop"));
  out.u16(narrow16(h.pred_window, "prediction window"));
  out.u16(narrow16(h.num_codes, "code count"));
  out.u32(static_cast<std::uint32_t>(h.sample_rate));
  out.u64(h.original_length);
  out.u32(h.frame_count);
  const auto l = static_cast<std::size_t>(h.pred_window);
  const auto m1 = static_cast<std::size_t>(h.num_codes - 1);
  for (const FrameCode& code : stream.records) {
    if (code.seed.size() != l || code.w2.size() != m1) {
      throw Error("frame code " + std::to_string(code.frame_index) +
                  " does not match the header dimensions");
    }
    out.u32(code.frame_index);
    for (float v : code.seed) out.f32(v);
    for (float v : code.w2) out.f32(v);
    out.f32(code.output_bias);
  }
  return out.take();
}

EncodedStream deserialize_stream(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes, "stream file");
  in.magic(kStreamMagic);
  read_version(in);
  EncodedStream stream;
  StreamHeader& h = stream.header;
  const std::size_t fp_at = in.offset();
  h.model_fingerprint = in.u64("model fingerprint");
  if (h.model_fingerprint == 0) in.fail(fp_at, "missing model fingerprint");
  h.domain = read_domain(in);
  h.window.length = in.u16("frame length");
  h.window.hop = in.u16("hop");
  h.pred_window = in.u16("prediction window");
  const std::size_t codes_at = in.offset();
  h.num_codes = in.u16("code count");
  if (h.num_codes < 2) in.fail(codes_at, "code count must be >= 2");
  h.sample_rate = static_cast<int>(in.u32("sample rate"));
  h.original_length = in.u64("original length");
  h.frame_count = in.u32("frame count");

  const std::size_t per_frame = stream_size_bytes(1, h.pred_window, h.num_codes) -
                                kStreamHeaderBytes;
  // A short file is reported by the field reads below, with its offset.
  stream.records.reserve(std::min<std::size_t>(h.frame_count, bytes.size() / per_frame + 1));
  for (std::uint32_t f = 0; f < h.frame_count; ++f) {
    FrameCode code;
    code.domain = h.domain;
    code.frame_index = in.u32("frame index");
    code.seed.resize(h.pred_window);
    for (float& v : code.seed) v = in.f32("seed");
    code.w2.resize(h.num_codes - 1);
    for (float& v : code.w2) v = in.f32("output weights");
    code.output_bias = in.f32("output bias");
    stream.records.push_back(std::move(code));
  }
  in.expect_end();
  return stream;
}

std::uint64_t model_fingerprint(const MappingModel& model) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize_model(model)) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::size_t stream_size_bytes(std::size_t frames, int pred_window,
                              int num_codes) {
  const auto per_frame = 4 + 4 * static_cast<std::size_t>(num_codes - 1) + 4 +
                         4 * static_cast<std::size_t>(pred_window);
  return kStreamHeaderBytes + frames * per_frame;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void write_model(const MappingModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

MappingModel read_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_stream(const EncodedStream& stream,
                  const std::filesystem::path& path) {
  write_file(path, serialize_stream(stream));
}

EncodedStream read_stream(const std::filesystem::path& path) {
  try {
    return deserialize_stream(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace fnpc
