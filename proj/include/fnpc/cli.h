#ifndef FNPC_CLI_H_
#define FNPC_CLI_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fnpc/codec.h"
#include "fnpc/dsp.h"
#include "fnpc/metrics.h"

namespace fnpc {

// Runs one command line (args[0] is the program name). Data goes to files or
// `out`; progress and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

struct SweepOptions {
  std::vector<int> codes = {8, 11, 16};
  std::vector<Domain> domains = {Domain::kTime, Domain::kDct};
  PredictorConfig predictor;  // num_codes is overridden per row
  WindowSpec window;
  bool dct_frame_windows = false;  // see PredictorConfig::map_block
  std::optional<double> noise_snr_db;  // AWGN added to the input first
  std::uint64_t noise_seed = 1;
  int jobs = 1;
};

struct SweepRow {
  Domain domain = Domain::kTime;
  int codes = 0;
  QualityReport report;
};

// Trains one mapping model per (domain, M), encodes and decodes `input`, and
// scores the result against the signal that was encoded. `progress` receives
// one line per finished stage when set.
std::vector<SweepRow> run_sweep(
    const std::vector<Signal>& corpus, const Signal& input,
    const SweepOptions& options,
    const std::function<void(const std::string&)>& progress = {});

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace fnpc

#endif  // FNPC_CLI_H_
