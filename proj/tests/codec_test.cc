#include "fnpc/codec.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fnpc/corpus.h"
#include "fnpc/error.h"
#include "fnpc/metrics.h"
#include "synth_speech.h"

namespace fnpc {
namespace {

CodecConfig config(Domain domain, int codes) {
  CodecConfig cfg;
  cfg.domain = domain;
  cfg.predictor.num_codes = codes;
  cfg.predictor.map_epochs = 3;
  return cfg;
}

MappingModel train_on(const std::vector<Signal>& corpus, const CodecConfig& cfg) {
  const MappingDataset data = build_mapping_dataset(corpus, cfg.domain, cfg.window);
  return train_mapping(data.stream, cfg.predictor, cfg.domain, cfg.window, data.sample_rate,
                       data.stats);
}

const Signal& tone() {
  static const Signal s = testing::sinusoid(440.0, 16000, 16000, 0.5);
  return s;
}

const Signal& speech() {
  static const Signal s = testing::synthesize_utterance(31, 1.0);
  return s;
}

const MappingModel& tone_model() {
  static const MappingModel m = train_on({tone()}, config(Domain::kTime, 16));
  return m;
}

const MappingModel& speech_model(Domain domain) {
  static const MappingModel time = train_on({testing::synthesize_utterance(30, 2.0)},
                                            config(Domain::kTime, 8));
  static const MappingModel dct = train_on({testing::synthesize_utterance(30, 2.0)},
                                           config(Domain::kDct, 8));
  return domain == Domain::kTime ? time : dct;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::path(::testing::TempDir()) / name;
}

TEST(Encode, OneSecondGives125RecordsOfTheRightShape) {
  const EncodedStream s = encode(tone(), tone_model(), config(Domain::kTime, 16));
  EXPECT_EQ(s.header.frame_count, 125u);
  ASSERT_EQ(s.records.size(), 125u);
  EXPECT_EQ(s.header.original_length, 16000u);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    EXPECT_EQ(s.records[i].frame_index, i);
    EXPECT_EQ(s.records[i].w2.size(), 15u);
    EXPECT_EQ(s.records[i].seed.size(), 40u);
  }
}

TEST(Encode, DeterministicAndIndependentOfJobs) {
  const CodecConfig cfg = config(Domain::kDct, 8);
  const EncodedStream a = encode(speech(), speech_model(Domain::kDct), cfg, 1);
  const EncodedStream b = encode(speech(), speech_model(Domain::kDct), cfg, 1);
  const EncodedStream c = encode(speech(), speech_model(Domain::kDct), cfg, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_stream(a), serialize_stream(c));
}

TEST(Encode, ConfigMustMatchModel) {
  EXPECT_THROW(encode(tone(), tone_model(), config(Domain::kDct, 16)), Error);
  EXPECT_THROW(encode(tone(), tone_model(), config(Domain::kTime, 8)), Error);
  Signal other = tone();
  other.sample_rate = 8000;
  EXPECT_THROW(encode(other, tone_model(), config(Domain::kTime, 16)), Error);
}

TEST(Decode, PreservesLength) {
  for (std::size_t len : {256u, 1000u, 16000u, 16001u}) {
    Signal s = testing::sinusoid(440.0, len, 16000, 0.5);
    const EncodedStream enc = encode(s, tone_model(), config(Domain::kTime, 16));
    EXPECT_EQ(decode(enc, tone_model()).samples.size(), len);
  }
}

TEST(Decode, SinusoidRoundTripAboveFiveDb) {
  // Default predictor settings throughout, mapping layer trained on the tone.
  CodecConfig cfg;
  cfg.predictor.num_codes = 16;
  const MappingModel model = train_on({tone()}, cfg);
  const Signal out = decode(encode(tone(), model, cfg), model);
  EXPECT_GT(segsnr(tone().samples, out.samples).mean_db, 5.0);
}

TEST(Decode, ZeroedRecordsGiveTheModelMean) {
  EncodedStream enc = encode(tone(), tone_model(), config(Domain::kTime, 16));
  for (FrameCode& r : enc.records) {
    std::fill(r.w2.begin(), r.w2.end(), 0.0f);
    std::fill(r.seed.begin(), r.seed.end(), 0.0f);
    r.output_bias = 0.0f;
  }
  const Signal out = decode(enc, tone_model());
  for (double v : out.samples) EXPECT_NEAR(v, tone_model().norm.mean, 1e-12);
}

TEST(Decode, WrongModelIsAMismatch) {
  const EncodedStream enc = encode(tone(), tone_model(), config(Domain::kTime, 16));
  MappingModel other = tone_model();
  other.w1[0] += 0.25f;
  try {
    decode(enc, other);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("model/stream mismatch"), std::string::npos);
  }
}

TEST(Pipeline, DomainsDifferOnlyInTheTransform) {
  PipelineTrace enc_time, enc_dct, dec_time, dec_dct;
  const EncodedStream st =
      encode(speech(), speech_model(Domain::kTime), config(Domain::kTime, 8), 1, &enc_time);
  const EncodedStream sd =
      encode(speech(), speech_model(Domain::kDct), config(Domain::kDct, 8), 1, &enc_dct);
  decode(st, speech_model(Domain::kTime), &dec_time);
  decode(sd, speech_model(Domain::kDct), &dec_dct);
  ASSERT_FALSE(enc_time.empty());
  ASSERT_FALSE(dec_time.empty());
  ASSERT_EQ(enc_time.size(), enc_dct.size());
  ASSERT_EQ(dec_time.size(), dec_dct.size());
  int differences = 0;
  for (std::size_t i = 0; i < enc_time.size(); ++i) {
    if (enc_time[i] != enc_dct[i]) {
      ++differences;
      EXPECT_EQ(enc_time[i], "transform:identity");
      EXPECT_EQ(enc_dct[i], "transform:dct");
    }
  }
  EXPECT_EQ(differences, 1);
  differences = 0;
  for (std::size_t i = 0; i < dec_time.size(); ++i) {
    if (dec_time[i] != dec_dct[i]) ++differences;
  }
  EXPECT_EQ(differences, 1);
  EXPECT_EQ(enc_time.front(), "normalize");
}

TEST(Format, HeaderSizesFollowTheFieldLists) {
  // magic, version, domain, N, hop, L, M, sample rate, mean, std_dev
  EXPECT_EQ(kModelHeaderBytes, 4u + 2 + 1 + 2 + 2 + 2 + 2 + 4 + 8 + 8);
  // magic, version, fingerprint, domain, N, hop, L, M, sample rate,
  // original length, frame count
  EXPECT_EQ(kStreamHeaderBytes, 4u + 2 + 8 + 1 + 2 + 2 + 2 + 2 + 4 + 8 + 4);
}

TEST(Format, StreamSizeMatchesFormula) {
  const EncodedStream enc = encode(tone(), tone_model(), config(Domain::kTime, 16));
  const auto bytes = serialize_stream(enc);
  const std::size_t expected = 39 + 125 * (4 + 4 * 15 + 4 + 4 * 40);
  EXPECT_EQ(bytes.size(), expected);
  EXPECT_EQ(stream_size_bytes(125, 40, 16), expected);
  const auto path = temp_path("size.fnpc");
  write_stream(enc, path);
  EXPECT_EQ(std::filesystem::file_size(path), expected);
}

TEST(Format, ModelSizeMatchesFormula) {
  const auto bytes = serialize_model(tone_model());
  EXPECT_EQ(bytes.size(), 35u + 4 * 15 + 4 * 15 * 40);
}

TEST(Format, ModelRoundTripIsBitExact) {
  const auto path = temp_path("m.fnpm");
  write_model(speech_model(Domain::kDct), path);
  const MappingModel back = read_model(path);
  EXPECT_EQ(back, speech_model(Domain::kDct));
  EXPECT_EQ(serialize_model(back), read_file(path));
  EXPECT_EQ(model_fingerprint(back), model_fingerprint(speech_model(Domain::kDct)));
}

TEST(Format, StreamRoundTripIsBitExact) {
  const EncodedStream enc = encode(speech(), speech_model(Domain::kTime), config(Domain::kTime, 8));
  const auto path = temp_path("s.fnpc");
  write_stream(enc, path);
  const EncodedStream back = read_stream(path);
  EXPECT_EQ(back, enc);
  EXPECT_EQ(serialize_stream(back), read_file(path));
  EXPECT_EQ(decode(back, speech_model(Domain::kTime)).samples,
            decode(enc, speech_model(Domain::kTime)).samples);
}

TEST(Format, LittleEndianLayout) {
  const auto bytes = serialize_model(tone_model());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FNPM");
  EXPECT_EQ(bytes[4], 1);  // version, low byte first
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 0);  // time domain
  EXPECT_EQ(bytes[7] | (bytes[8] << 8), 256);
  EXPECT_EQ(bytes[9] | (bytes[10] << 8), 128);
  EXPECT_EQ(bytes[11] | (bytes[12] << 8), 40);
  EXPECT_EQ(bytes[13] | (bytes[14] << 8), 16);
  const auto sbytes = serialize_stream(encode(tone(), tone_model(), config(Domain::kTime, 16)));
  EXPECT_EQ(std::string(sbytes.begin(), sbytes.begin() + 4), "FNPC");
  std::uint64_t fp = 0;
  for (int i = 0; i < 8; ++i) fp |= static_cast<std::uint64_t>(sbytes[6 + i]) << (8 * i);
  EXPECT_EQ(fp, model_fingerprint(tone_model()));
}

void expect_error(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
    FAIL() << "expected an error containing '" << needle << "'";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(Format, CorruptFilesNameTheProblem) {
  const auto model_bytes = serialize_model(tone_model());
  const auto stream_bytes = serialize_stream(encode(tone(), tone_model(), config(Domain::kTime, 16)));

  auto bad = model_bytes;
  bad[0] = 'X';
  expect_error([&] { deserialize_model(bad); }, "bad magic");
  bad = stream_bytes;
  bad[3] = 'X';
  expect_error([&] { deserialize_stream(bad); }, "bad magic");

  bad = model_bytes;
  bad[4] = 9;
  expect_error([&] { deserialize_model(bad); }, "version mismatch");

  bad.assign(model_bytes.begin(), model_bytes.begin() + 100);
  expect_error([&] { deserialize_model(bad); }, "truncated");
  expect_error([&] { deserialize_model(bad); }, "offset 99");
  bad.assign(stream_bytes.begin(), stream_bytes.end() - 3);
  expect_error([&] { deserialize_stream(bad); }, "truncated");
  expect_error([&] { deserialize_stream(bad); }, "offset");

  bad = stream_bytes;
  for (int i = 6; i < 14; ++i) bad[i] = 0;
  expect_error([&] { deserialize_stream(bad); }, "missing model fingerprint");

  bad = model_bytes;
  bad.push_back(0);
  expect_error([&] { deserialize_model(bad); }, "trailing");

  expect_error([&] { read_model(temp_path("does-not-exist.fnpm")); }, "does-not-exist");
}

}  // namespace
}  // namespace fnpc
