#include "fnpc/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fnpc/codec.h"
#include "fnpc/error.h"

namespace fnpc {

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

Signal read_wav(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(name + ": not a RIFF WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > bytes.size()) {
        throw Error(name + ": malformed fmt chunk at offset " + std::to_string(pos));
      }
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == kFormatExtensible && len >= 26) {
        format = le16(bytes.data() + body + 24);  // sub-format GUID prefix
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Tolerate a data size that overruns the file (streamed writers).
      data_len = std::min(len, bytes.size() - body);
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw Error(name + ": missing fmt chunk");
  if (data == nullptr) throw Error(name + ": missing data chunk");
  if (format != kFormatPcm || bits != 16) {
    throw Error(name + ": unsupported encoding (format " + std::to_string(format) +
                ", " + std::to_string(bits) + " bits); need 16-bit PCM");
  }
  if (channels != 1) {
    throw Error(name + ": unsupported channel count " + std::to_string(channels) +
                "; need mono");
  }
  if (rate == 0) throw Error(name + ": zero sample rate");

  Signal signal;
  signal.sample_rate = static_cast<int>(rate);
  const std::size_t count = data_len / 2;
  signal.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
    signal.samples[i] = v / 32768.0;
  }
  return signal;
}

void write_wav(const Signal& signal, const std::filesystem::path& path) {
  const std::size_t count = signal.samples.size();
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(count * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(signal.sample_rate));
  put32(out, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, data_bytes);
  for (double v : signal.samples) {
    const double scaled = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  write_file(path, out);
}

std::vector<PhoneSegment> parse_phn_text(const std::string& text) {
  std::vector<PhoneSegment> segments;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string start_s, end_s, label, extra;
    fields >> start_s >> end_s >> label;
    if (label.empty() || (fields >> extra)) {
      throw Error("expected 'start end label' at line " + std::to_string(line_no));
    }
    const auto parse_bound = [&](const std::string& s) -> std::size_t {
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw Error("non-numeric bound '" + s + "' at line " + std::to_string(line_no));
      }
      return std::stoull(s);
    };
    PhoneSegment seg{parse_bound(start_s), parse_bound(end_s), label};
    if (seg.start_sample >= seg.end_sample) {
      throw Error("start >= end at line " + std::to_string(line_no));
    }
    if (!segments.empty() && seg.start_sample < segments.back().end_sample) {
      throw Error("segment out of order at line " + std::to_string(line_no));
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<PhoneSegment> parse_phn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_phn_text(text.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<Signal> extract_segments(const Signal& signal,
                                     const std::vector<PhoneSegment>& segments,
                                     const std::set<std::string>& labels) {
  std::vector<Signal> out;
  for (const PhoneSegment& seg : segments) {
    if (seg.end_sample > signal.samples.size()) {
      throw Error("segment '" + seg.label + "' [" + std::to_string(seg.start_sample) +
                  ", " + std::to_string(seg.end_sample) + ") exceeds the signal length " +
                  std::to_string(signal.samples.size()));
    }
    if (!labels.contains(seg.label)) continue;
    Signal part;
    part.sample_rate = signal.sample_rate;
    part.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(seg.start_sample),
                        signal.samples.begin() + static_cast<std::ptrdiff_t>(seg.end_sample));
    out.push_back(std::move(part));
  }
  return out;
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  CorpusManifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    ManifestEntry entry;
    const auto tab = line.find('\t', first);
    entry.audio = resolve(line.substr(first, tab == std::string::npos ? std::string::npos : tab - first));
    if (tab != std::string::npos) {
      const std::string rest = line.substr(tab + 1);
      if (!rest.empty()) entry.labels = resolve(rest);
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (manifest.entries.empty()) throw Error("manifest " + path.string() + " lists no files");
  return manifest;
}

MappingDataset build_mapping_dataset(const std::vector<Signal>& signals,
                                     Domain domain, const WindowSpec& window) {
  if (signals.empty()) throw Error("mapping corpus is empty");
  MappingDataset ds;
  ds.sample_rate = signals.front().sample_rate;
  for (const Signal& s : signals) {
    if (s.sample_rate != ds.sample_rate) {
      throw Error("mapping corpus mixes sample rates " + std::to_string(ds.sample_rate) +
                  " and " + std::to_string(s.sample_rate));
    }
    if (domain == Domain::kTime) {
      ds.stream.insert(ds.stream.end(), s.samples.begin(), s.samples.end());
    } else {
      for (const Frame& f : frame_signal(s, window)) {
        const Frame c = dct_forward(f);
        ds.stream.insert(ds.stream.end(), c.values.begin(), c.values.end());
      }
    }
  }
  ds.stats = compute_norm_stats(ds.stream);
  normalize_in_place(ds.stream, ds.stats);
  return ds;
}

MappingDataset build_mapping_dataset(CorpusManifest& manifest, Domain domain,
                                     const WindowSpec& window) {
  if (manifest.entries.empty()) throw Error("manifest lists no files");
  std::vector<Signal> signals;
  manifest.total_samples = 0;
  for (const ManifestEntry& entry : manifest.entries) {
    Signal audio;
    try {
      audio = read_wav(entry.audio);
      if (entry.labels) {
        const auto segments = parse_phn(*entry.labels);
        std::set<std::string> all;
        for (const auto& s : segments) all.insert(s.label);
        Signal joined;
        joined.sample_rate = audio.sample_rate;
        for (const Signal& part : extract_segments(audio, segments, all)) {
          joined.samples.insert(joined.samples.end(), part.samples.begin(), part.samples.end());
        }
        audio = std::move(joined);
      }
      if (domain == Domain::kDct && audio.samples.size() < static_cast<std::size_t>(window.length)) {
        throw Error("shorter than one frame");
      }
    } catch (const Error& e) {
      const std::string what = e.what();
      // read_wav/parse_phn already prefix the path.
      if (what.rfind(entry.audio.string(), 0) == 0) throw;
      throw Error(entry.audio.string() + ": " + what);
    }
    manifest.total_samples += audio.samples.size();
    signals.push_back(std::move(audio));
  }
  return build_mapping_dataset(signals, domain, window);
}

}  // namespace fnpc
