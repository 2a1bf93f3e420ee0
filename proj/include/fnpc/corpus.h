#ifndef FNPC_CORPUS_H_
#define FNPC_CORPUS_H_

// Audio and label ingestion: PCM-16 mono RIFF WAV, TIMIT .phn labels, and
// assembly of the normalized mapping-phase sample stream.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fnpc/dsp.h"

namespace fnpc {

Signal read_wav(const std::filesystem::path& path);
// Samples are scaled by 32768, rounded to nearest and clipped to int16.
void write_wav(const Signal& signal, const std::filesystem::path& path);

struct PhoneSegment {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
  std::string label;

  friend bool operator==(const PhoneSegment&, const PhoneSegment&) = default;
};

// One "start end label" triple per line. Segments must not start before the
// previous one ended.
std::vector<PhoneSegment> parse_phn(const std::filesystem::path& path);
std::vector<PhoneSegment> parse_phn_text(const std::string& text);

// Sub-signals for segments whose label is in `labels`, in file order.
std::vector<Signal> extract_segments(const Signal& signal,
                                     const std::vector<PhoneSegment>& segments,
                                     const std::set<std::string>& labels);

struct ManifestEntry {
  std::filesystem::path audio;
  std::optional<std::filesystem::path> labels;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::size_t total_samples = 0;  // filled by build_mapping_dataset
};

// One audio path per line, optionally "audio<TAB>labels". Relative paths are
// resolved against the manifest's directory; blank lines and '#' comments
// are ignored.
CorpusManifest read_manifest(const std::filesystem::path& path);

struct MappingDataset {
  std::vector<double> stream;  // normalized
  NormStats stats;
  int sample_rate = 16000;
};

// Time domain: all audio concatenated. DCT domain: every file framed with the
// Hamming window and transformed, coefficient frames concatenated in order.
// Files with labels contribute only their labeled spans. The statistics are
// taken over the whole stream, which is then normalized with them.
MappingDataset build_mapping_dataset(CorpusManifest& manifest, Domain domain,
                                     const WindowSpec& window);

// Same assembly over signals already in memory.
MappingDataset build_mapping_dataset(const std::vector<Signal>& signals,
                                     Domain domain, const WindowSpec& window);

}  // namespace fnpc

#endif  // FNPC_CORPUS_H_
