#include "fnpc/cli.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "fnpc/corpus.h"
#include "fnpc/error.h"

namespace fnpc {

namespace {

// Values a command can take from a key=value config file or from flags.
// Flags win over the file, the file wins over the defaults.
struct Settings {
  std::optional<int> frame_len, hop, pred_window, epochs, code_iters, jobs;
  std::optional<double> lr, code_lr;
  std::optional<std::uint64_t> seed;
  std::optional<bool> dct_frame_windows;
};

void merge(Settings& into, const Settings& from) {
  const auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(into.frame_len, from.frame_len);
  take(into.hop, from.hop);
  take(into.pred_window, from.pred_window);
  take(into.epochs, from.epochs);
  take(into.code_iters, from.code_iters);
  take(into.jobs, from.jobs);
  take(into.lr, from.lr);
  take(into.code_lr, from.code_lr);
  take(into.seed, from.seed);
  take(into.dct_frame_windows, from.dct_frame_windows);
}

Settings read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  Settings s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      const auto as_int = [&] {
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      };
      const auto as_double = [&] {
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      };
      if (key == "frame_len") s.frame_len = as_int();
      else if (key == "hop") s.hop = as_int();
      else if (key == "pred_window") s.pred_window = as_int();
      else if (key == "epochs") s.epochs = as_int();
      else if (key == "code_iters") s.code_iters = as_int();
      else if (key == "jobs") s.jobs = as_int();
      else if (key == "lr") s.lr = as_double();
      else if (key == "code_lr") s.code_lr = as_double();
      else if (key == "seed") s.seed = std::stoull(value, &used);
      else if (key == "dct_frame_windows") s.dct_frame_windows = as_int() != 0;
      else throw Error(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw Error(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
  return s;
}

void add_settings_flags(CLI::App* cmd, Settings& s, bool training, bool coding) {
  cmd->add_option("--frame-len", s.frame_len, "Frame length N (default 256)");
  cmd->add_option("--hop", s.hop, "Frame hop (default N/2)");
  cmd->add_option("--seed", s.seed, "Random seed (default 1)");
  if (training) {
    cmd->add_option("--epochs", s.epochs, "Mapping-phase epochs (default 20)");
    cmd->add_option("--lr", s.lr, "Mapping-phase learning rate (default 0.01)");
    cmd->add_option("--pred-window", s.pred_window, "Prediction window L (default 40)");
    cmd->add_flag("--dct-frame-windows{true}", s.dct_frame_windows,
                  "DCT mapping phase: keep each prediction window inside one frame");
  }
  if (coding) {
    cmd->add_option("--code-iters", s.code_iters, "Coding iterations per frame (default 200)");
    cmd->add_option("--code-lr", s.code_lr, "Coding learning rate (default 0.05)");
    cmd->add_option("--jobs", s.jobs, "Worker threads for encoding (0 = all cores)");
  }
}

PredictorConfig predictor_from(const Settings& s, int codes) {
  PredictorConfig p;
  p.num_codes = codes;
  if (s.pred_window) p.pred_window = *s.pred_window;
  if (s.epochs) p.map_epochs = *s.epochs;
  if (s.lr) p.map_learning_rate = *s.lr;
  if (s.code_iters) p.code_iterations = *s.code_iters;
  if (s.code_lr) p.code_learning_rate = *s.code_lr;
  if (s.seed) p.rng_seed = *s.seed;
  p.validate();
  return p;
}

WindowSpec window_from(const Settings& s) {
  WindowSpec w;
  if (s.frame_len) {
    w.length = *s.frame_len;
    w.hop = w.length / 2;
  }
  if (s.hop) w.hop = *s.hop;
  w.validate();
  return w;
}

int jobs_from(const Settings& s) {
  const int jobs = s.jobs.value_or(0);
  if (jobs < 0) throw Error("--jobs must be >= 0");
  return jobs;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Signal> load_corpus(const std::string& manifest_path) {
  CorpusManifest manifest = read_manifest(manifest_path);
  std::vector<Signal> signals;
  for (const ManifestEntry& entry : manifest.entries) {
    Signal audio = read_wav(entry.audio);
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
    signals.push_back(std::move(audio));
  }
  return signals;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

void dump_stream(const EncodedStream& stream, std::ostream& out) {
  const StreamHeader& h = stream.header;
  out << "format_version: " << kFormatVersion << '\n'
      << "model_fingerprint: 0x" << std::hex << std::setw(16) << std::setfill('0')
      << h.model_fingerprint << std::dec << std::setfill(' ') << '\n'
      << "domain: " << domain_name(h.domain) << '\n'
      << "frame_len: " << h.window.length << '\n'
      << "hop: " << h.window.hop << '\n'
      << "pred_window: " << h.pred_window << '\n'
      << "codes: " << h.num_codes << '\n'
      << "sample_rate: " << h.sample_rate << '\n'
      << "original_length: " << h.original_length << '\n'
      << "frame_count: " << h.frame_count << '\n'
      << "bytes: " << stream_size_bytes(h.frame_count, h.pred_window, h.num_codes) << '\n'
      << "frame\tbias\tw2_l2\tw2_maxabs\tseed_rms\n";
  for (const FrameCode& c : stream.records) {
    double l2 = 0.0, maxabs = 0.0, seed_ss = 0.0;
    for (float w : c.w2) {
      l2 += static_cast<double>(w) * w;
      maxabs = std::max(maxabs, std::abs(static_cast<double>(w)));
    }
    for (float s : c.seed) seed_ss += static_cast<double>(s) * s;
    const double seed_rms = c.seed.empty() ? 0.0 : std::sqrt(seed_ss / c.seed.size());
    out << c.frame_index << '\t' << fixed(c.output_bias) << '\t' << fixed(std::sqrt(l2))
        << '\t' << fixed(maxabs) << '\t' << fixed(seed_rms) << '\n';
  }
}

}  // namespace

std::vector<SweepRow> run_sweep(
    const std::vector<Signal>& corpus, const Signal& input,
    const SweepOptions& options,
    const std::function<void(const std::string&)>& progress) {
  Signal coded_input = input;
  if (options.noise_snr_db) {
    coded_input = add_awgn(input, *options.noise_snr_db, options.noise_seed);
  }
  std::vector<SweepRow> rows;
  for (Domain domain : options.domains) {
    const MappingDataset data = build_mapping_dataset(corpus, domain, options.window);
    if (data.sample_rate != input.sample_rate) {
      throw Error("corpus sample rate " + std::to_string(data.sample_rate) +
                  " differs from the input's " + std::to_string(input.sample_rate));
    }
    for (int codes : options.codes) {
      CodecConfig cfg;
      cfg.window = options.window;
      cfg.domain = domain;
      cfg.predictor = options.predictor;
      cfg.predictor.num_codes = codes;
      cfg.predictor.map_block =
          domain == Domain::kDct && options.dct_frame_windows ? cfg.window.length : 0;
      cfg.sample_rate = data.sample_rate;
      cfg.validate();
      const MappingModel model =
          train_mapping(data.stream, cfg.predictor, domain, cfg.window,
                        cfg.sample_rate, data.stats);
      const EncodedStream stream = encode(coded_input, model, cfg, options.jobs);
      const Signal decoded = decode(stream, model);
      SweepRow row;
      row.domain = domain;
      row.codes = codes;
      row.report = evaluate(coded_input, decoded,
                            {static_cast<std::size_t>(cfg.window.length),
                             static_cast<std::size_t>(cfg.window.hop), 10,
                             cfg.sample_rate});
      if (progress) {
        progress(std::string(domain_name(domain)) + " M=" + std::to_string(codes) +
                 ": segsnr " + fixed(row.report.segsnr_db, 2) + " dB, llr " +
                 fixed(row.report.llr, 3) + ", wss " + fixed(row.report.wss, 2));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "domain,codes,segsnr_db,llr,wss\n";
  for (const SweepRow& r : rows) {
    os << domain_name(r.domain) << ',' << r.codes << ',' << fixed(r.report.segsnr_db)
       << ',' << fixed(r.report.llr) << ',' << fixed(r.report.wss) << '\n';
  }
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Frame-based nonlinear predictive speech codec"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file with default settings");

  Settings flags;

  // train-map
  auto* train = app.add_subcommand("train-map", "Train the mapping layer over a corpus");
  std::string manifest, domain_str, out_path;
  int codes = 0;
  train->add_option("--manifest", manifest, "Corpus manifest")->required();
  train->add_option("--domain", domain_str, "time|dct")
      ->required()
      ->check(CLI::IsMember({"time", "dct"}));
  train->add_option("--codes", codes, "Number of codes M (>= 2)")->required();
  train->add_option("--out", out_path, "Model file to write")->required();
  add_settings_flags(train, flags, true, false);

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a WAV file");
  std::string model_path, in_path;
  enc->add_option("--model", model_path, "Model file")->required();
  enc->add_option("--in", in_path, "Input WAV")->required();
  enc->add_option("--out", out_path, "Stream file to write")->required();
  add_settings_flags(enc, flags, false, true);

  // decode
  auto* dec = app.add_subcommand("decode", "Decode a stream file to WAV");
  dec->add_option("--model", model_path, "Model file")->required();
  dec->add_option("--in", in_path, "Stream file")->required();
  dec->add_option("--out", out_path, "Output WAV")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Objective quality of a test WAV against a reference");
  std::string ref_path, test_path;
  ev->add_option("--ref", ref_path, "Reference WAV")->required();
  ev->add_option("--test", test_path, "Test WAV")->required();
  ev->add_option("--out", out_path, "Report JSON (stdout when omitted)");

  // add-noise
  auto* noise = app.add_subcommand("add-noise", "Add white Gaussian noise at a given SNR");
  double snr = 20.0;
  std::uint64_t noise_seed = 1;
  noise->add_option("--in", in_path, "Input WAV")->required();
  noise->add_option("--snr", snr, "SNR in dB (default 20)");
  noise->add_option("--seed", noise_seed, "Noise seed (default 1)");
  noise->add_option("--out", out_path, "Output WAV")->required();

  // spectrogram
  auto* spec = app.add_subcommand("spectrogram", "Write a dB spectrogram as CSV");
  spec->add_option("--in", in_path, "Input WAV")->required();
  spec->add_option("--out", out_path, "CSV file")->required();
  add_settings_flags(spec, flags, false, false);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train, code and score a (domain, M) grid");
  std::string codes_list = "8,11,16", domains_list = "time,dct";
  std::optional<double> sweep_snr;
  sweep->add_option("--manifest", manifest, "Corpus manifest")->required();
  sweep->add_option("--in", in_path, "Test utterance WAV")->required();
  sweep->add_option("--codes", codes_list, "Comma-separated code counts");
  sweep->add_option("--domains", domains_list, "Comma-separated domains");
  sweep->add_option("--out", out_path, "CSV file")->required();
  sweep->add_option("--snr", sweep_snr, "Add white noise at this SNR before coding");
  add_settings_flags(sweep, flags, true, true);

  // dump
  auto* dump = app.add_subcommand("dump", "Print a stream file header and code summary");
  dump->add_option("--in", in_path, "Stream file")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    Settings s;
    if (!config_path.empty()) s = read_config_file(config_path);
    merge(s, flags);
    const auto log = [&err](const std::string& line) { err << line << std::endl; };

    if (train->parsed()) {
      PredictorConfig pred = predictor_from(s, codes);
      const WindowSpec window = window_from(s);
      const Domain domain = parse_domain(domain_str);
      if (domain == Domain::kDct && s.dct_frame_windows.value_or(false)) {
        pred.map_block = window.length;
        pred.validate();
      }
      CorpusManifest m = read_manifest(manifest);
      const MappingDataset data = build_mapping_dataset(m, domain, window);
      log("corpus: " + std::to_string(m.entries.size()) + " files, " +
          std::to_string(m.total_samples) + " samples, stream " +
          std::to_string(data.stream.size()));
      MappingLog history;
      const MappingModel model = train_mapping(data.stream, pred, domain, window,
                                               data.sample_rate, data.stats, &history);
      for (std::size_t e = 0; e < history.epoch_loss.size(); ++e) {
        log("epoch " + std::to_string(e + 1) + ": mean loss " + fixed(history.epoch_loss[e], 6));
      }
      write_model(model, out_path);
      log("wrote " + out_path);
    } else if (enc->parsed()) {
      const int jobs = jobs_from(s);
      const MappingModel model = read_model(model_path);
      CodecConfig cfg;
      cfg.window = model.window;
      cfg.domain = model.domain;
      cfg.sample_rate = model.sample_rate;
      Settings coding = s;
      coding.pred_window = model.pred_window;
      cfg.predictor = predictor_from(coding, model.num_codes);
      if ((s.frame_len && *s.frame_len != model.window.length) ||
          (s.hop && *s.hop != model.window.hop)) {
        throw Error("framing flags disagree with the model");
      }
      const Signal input = read_wav(in_path);
      const EncodedStream stream = encode(input, model, cfg, jobs);
      write_stream(stream, out_path);
      log("encoded " + std::to_string(stream.records.size()) + " frames to " + out_path);
    } else if (dec->parsed()) {
      const MappingModel model = read_model(model_path);
      const EncodedStream stream = read_stream(in_path);
      write_wav(decode(stream, model), out_path);
      log("decoded " + std::to_string(stream.records.size()) + " frames to " + out_path);
    } else if (ev->parsed()) {
      const Signal ref = read_wav(ref_path);
      const Signal test = read_wav(test_path);
      SpectralOptions opt;
      opt.sample_rate = ref.sample_rate;
      const std::string json = evaluate(ref, test, opt).to_json() + "\n";
      if (out_path.empty()) {
        out << json;
      } else {
        write_text(out_path, json);
      }
    } else if (noise->parsed()) {
      write_wav(add_awgn(read_wav(in_path), snr, noise_seed), out_path);
    } else if (spec->parsed()) {
      const WindowSpec window = window_from(s);
      const Signal input = read_wav(in_path);
      write_text(out_path, spectrogram_csv(spectrogram(input, window.length, window.hop)));
    } else if (sweep->parsed()) {
      SweepOptions opt;
      opt.codes.clear();
      for (const auto& c : split_list(codes_list)) {
        try {
          opt.codes.push_back(std::stoi(c));
        } catch (const std::logic_error&) {
          throw Error("bad code count '" + c + "'");
        }
      }
      opt.domains.clear();
      for (const auto& d : split_list(domains_list)) opt.domains.push_back(parse_domain(d));
      if (opt.codes.empty() || opt.domains.empty()) throw Error("empty sweep grid");
      for (int c : opt.codes) predictor_from(s, c);
      opt.predictor = predictor_from(s, opt.codes.front());
      opt.window = window_from(s);
      opt.dct_frame_windows = s.dct_frame_windows.value_or(false);
      opt.noise_snr_db = sweep_snr;
      opt.noise_seed = s.seed.value_or(1);
      opt.jobs = jobs_from(s);
      const std::vector<Signal> corpus = load_corpus(manifest);
      const Signal input = read_wav(in_path);
      write_text(out_path, sweep_csv(run_sweep(corpus, input, opt, log)));
    } else if (dump->parsed()) {
      dump_stream(read_stream(in_path), out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace fnpc
