#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>

#include "bindoa/eval.hpp"
#include "bindoa/wav.hpp"

namespace bindoa {
namespace {

namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

RunConfig parse(const std::string& text, const std::string& base = ".") {
  std::istringstream in(text);
  return parse_run_config(in, base);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("bindoa_eval_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

const char* kSmallRun =
    "# two short scenes\n"
    "num_sources = 1\n"
    "scene = 40 @ 5\n"
    "scene = -120 @ 0\n"
    "duration = 1.5\n"
    "cdr_thresholds_db = -inf, 0\n"
    "estimators = CW, SC\n"
    "seed = 4\n";

TEST(ParseRunConfig, Defaults) {
  const RunConfig c = parse("scene = -40, 80\n");
  EXPECT_EQ(c.pipeline.stft.window_len, 512u);
  EXPECT_EQ(c.pipeline.tau_y, 0.25);
  EXPECT_EQ(c.pipeline.tau_u, 0.5);
  EXPECT_EQ(c.pipeline.thresholds_db, (std::vector<double>{-kInf, 0.0}));
  EXPECT_EQ(c.pipeline.estimators,
            (std::vector<RtfMethod>{RtfMethod::kCw, RtfMethod::kSc}));
  EXPECT_EQ(c.pipeline.num_sources, 2u);
  EXPECT_EQ(c.pipeline.spp_mode, SppMode::kOracle);
  EXPECT_EQ(c.pipeline.mic_pairs, SubsetCriterion::interaural_pairs(4));
  EXPECT_EQ(c.geometry, default_geometry());
  ASSERT_EQ(c.scenes.size(), 1u);
  EXPECT_EQ(c.scenes[0].spec.azimuths, (std::vector<double>{-40.0, 80.0}));
  EXPECT_EQ(c.scenes[0].id, "s0001");
}

TEST(ParseRunConfig, TwoSpeakerSweepIsAllOrderedPairs) {
  const RunConfig c = parse(
      "sweep_azimuths = -160:40:160\n"
      "snr_db = -5, 0, 5\n");
  ASSERT_EQ(c.scenes.size(), 216u);
  std::map<double, int> per_snr;
  for (const auto& s : c.scenes) {
    ASSERT_EQ(s.spec.azimuths.size(), 2u);
    EXPECT_NE(s.spec.azimuths[0], s.spec.azimuths[1]);
    ++per_snr[s.spec.snr_db];
  }
  EXPECT_EQ(per_snr[-5.0], 72);
  EXPECT_EQ(per_snr[0.0], 72);
  EXPECT_EQ(per_snr[5.0], 72);
  // Each scene gets its own seed.
  EXPECT_NE(c.scenes[0].spec.seed, c.scenes[1].spec.seed);
}

TEST(ParseRunConfig, KeysAndOverrides) {
  const RunConfig c = parse(
      "num_sources = 1\n"
      "scene = 30\n"
      "tau_y = 0.3\n"
      "tau_u = 0.6\n"
      "alpha = 0.4\n"
      "beta = 2.0\n"
      "head_distance = 0.17\n"
      "speed_of_sound = 340\n"
      "mic_pairs = 1-3, 2-4\n"
      "cdr_thresholds_db = 0, 5\n"
      "estimators = SC\n"
      "f_min = 200\n"
      "f_max = 6000\n"
      "spp_mode = estimated\n"
      "spp_threshold = 0.6\n"
      "convergence_skip = 0.25\n"
      "noise = none\n"
      "external_distance = 2.5\n"
      "write_frames = false\n");
  EXPECT_EQ(c.pipeline.tau_y, 0.3);
  EXPECT_EQ(c.pipeline.coherence.alpha, 0.4);
  EXPECT_EQ(c.pipeline.coherence.distance, 0.17);
  EXPECT_EQ(c.pipeline.mic_pairs, (std::vector<MicPair>{{0, 2}, {1, 3}}));
  EXPECT_EQ(c.pipeline.thresholds_db, (std::vector<double>{0.0, 5.0}));
  EXPECT_EQ(c.pipeline.estimators, std::vector<RtfMethod>{RtfMethod::kSc});
  EXPECT_EQ(c.pipeline.f_min, 200.0);
  EXPECT_EQ(c.pipeline.spp_mode, SppMode::kEstimated);
  EXPECT_EQ(c.pipeline.spp_threshold, 0.6);
  EXPECT_EQ(c.convergence_skip, 0.25);
  EXPECT_EQ(c.scenes[0].spec.noise, NoiseKind::kNone);
  EXPECT_EQ(c.geometry.back()[0], 2.5);
  EXPECT_FALSE(c.write_frames);
  EXPECT_EQ(c.echo.size(), 19u);
  EXPECT_EQ(c.echo[1], (std::pair<std::string, std::string>{"scene", "30"}));
}

void expect_config_error(const std::string& text) {
  try {
    parse(text);
    ADD_FAILURE() << "accepted: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig) << text;
  }
}

TEST(ParseRunConfig, Rejections) {
  expect_config_error("scene = 10, 20\nestimators =\n");
  expect_config_error("scene = 10, 20\nestimators = XY\n");
  expect_config_error("estimators = CW\n");  // no scenes
  expect_config_error("scene = 10, 20\ncdr_thresholds_db =\n");
  expect_config_error("scene = 10, 20\nbogus = 1\n");
  expect_config_error("scene = 10, 20\nseed = 1\nseed = 2\n");
  expect_config_error("scene = 10, 20\njust text\n");
  expect_config_error("scene = 10, 20\ntau_y = abc\n");
  expect_config_error("scene = 10\n");  // one speaker, num_sources = 2
  expect_config_error("scene = 10, 10\n");
  expect_config_error("scene = 10, 20\nmic_pairs = 1-2\n");
  expect_config_error("scene = 10, 20\nsweep_azimuths = 0:-5:10\n");
  expect_config_error("scene = 10, 20\ngeometry_file = /nonexistent/geo.txt\n");
  expect_config_error("wav_scene = a.wav | 10, 20\n");  // oracle SPP on WAV
}

TEST(ParseGeometry, HeadAndExternal) {
  std::istringstream in(
      "# left then right\n"
      "head 0.0075 0.09 0\n"
      "head -0.0075, 0.09, 0\n"
      "external 1 0 0\n"
      "head 0 -0.09 0\n");
  const auto g = parse_geometry(in, true);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g[1], (Position{-0.0075, 0.09, 0.0}));
  EXPECT_EQ(g[2], (Position{0.0, -0.09, 0.0}));
  EXPECT_EQ(g[3], (Position{1.0, 0.0, 0.0}));
}

TEST(ParseGeometry, Errors) {
  std::istringstream no_external("head 0 0 0\nhead 1 0 0\n");
  EXPECT_THROW(parse_geometry(no_external, true), Error);
  std::istringstream fine("head 0 0 0\nhead 1 0 0\n");
  EXPECT_EQ(parse_geometry(fine, false).size(), 2u);
  std::istringstream bad_kind("ear 0 0 0\n");
  EXPECT_THROW(parse_geometry(bad_kind, false), Error);
  std::istringstream short_row("head 0 0\nhead 1 0 0\n");
  EXPECT_THROW(parse_geometry(short_row, false), Error);
  std::istringstream two_ext("head 0 0 0\nhead 1 0 0\nexternal 1 1 1\nexternal 2 2 2\n");
  EXPECT_THROW(parse_geometry(two_ext, true), Error);
}

TEST(Run, BothVariantsPerEstimatorAndConsistentReport) {
  RunConfig c = parse(kSmallRun);
  const EvalReport report = run(c);
  EXPECT_TRUE(report.failures.empty());
  ASSERT_EQ(report.rows.size(), 2u * 2u * 2u);
  ASSERT_EQ(report.summary.size(), 4u);
  for (const auto& row : report.rows) {
    EXPECT_GE(row.mean_acc, 0.0);
    EXPECT_LE(row.mean_acc, 1.0);
    EXPECT_EQ(row.frames_total, num_frames_for(24000, c.pipeline.stft));
    EXPECT_EQ(row.frame_acc.size(), row.frames_total);
    EXPECT_LT(row.frames_scored, row.frames_total);
  }
  for (const auto& s : report.summary) {
    double weighted = 0.0;
    std::size_t frames = 0;
    for (const auto& row : report.rows) {
      if (row.estimator != s.estimator || row.threshold_db != s.threshold_db) continue;
      weighted += row.mean_acc * static_cast<double>(row.frames_scored);
      frames += row.frames_scored;
    }
    EXPECT_EQ(s.frames, frames);
    EXPECT_NEAR(s.mean_acc, weighted / static_cast<double>(frames), 1e-12);
    EXPECT_EQ(s.scenes, 2u);
  }
  EXPECT_NO_THROW(report.find(RtfMethod::kSc, -kInf));
  EXPECT_THROW(report.find(RtfMethod::kSc, 3.0), Error);
}

TEST(Run, FailedSceneIsRecordedAndSkipped) {
  const fs::path dir = scratch("bad_wav");
  fs::create_directories(dir);
  write_wav((dir / "short.wav").string(),
            {16000.0, MultichannelSignal(5, std::vector<double>(16000, 0.01))});
  write_wav((dir / "wrong_rate.wav").string(),
            {8000.0, MultichannelSignal(5, std::vector<double>(16000, 0.01))});
  RunConfig c = parse(
      "num_sources = 1\n"
      "spp_mode = estimated\n"
      "wav_scene = short.wav | 30\n"
      "wav_scene = wrong_rate.wav | 30\n",
      dir.string());
  const EvalReport report = run(c);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].scene_id, "s0002");
  EXPECT_EQ(report.rows.size(), 4u);
  fs::remove_all(dir);
}

TEST(EmitReport, CreatesDirectoryAndRerunIsByteIdentical) {
  const fs::path a = scratch("a") / "nested";
  const fs::path b = scratch("b");
  RunConfig c = parse(kSmallRun);
  emit_report(run(c), a.string());
  c.threads = 1;
  emit_report(run(c), b.string());
  for (const char* name : {"results.csv", "summary.csv", "frames.csv"}) {
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_TRUE(fs::exists(a / "run_meta.json"));
  const std::string meta = slurp(a / "run_meta.json");
  EXPECT_NE(meta.find("\"seed\": 4"), std::string::npos);
  EXPECT_NE(meta.find("\"cdr_thresholds_db\""), std::string::npos);

  // Aggregate equals the frame-weighted mean of the long-format rows.
  const auto results = read_csv(a / "results.csv");
  const auto summary = read_csv(a / "summary.csv");
  ASSERT_EQ(results.size(), 9u);
  ASSERT_EQ(summary.size(), 5u);
  for (std::size_t s = 1; s < summary.size(); ++s) {
    double weighted = 0.0;
    double frames = 0.0;
    for (std::size_t r = 1; r < results.size(); ++r) {
      if (results[r][1] != summary[s][0] || results[r][2] != summary[s][1]) continue;
      weighted += std::stod(results[r][5]) * std::stod(results[r][7]);
      frames += std::stod(results[r][7]);
    }
    EXPECT_NEAR(std::stod(summary[s][2]), weighted / frames, 1e-9);
  }
  EXPECT_EQ(summary[1][1], "-inf");
  fs::remove_all(a.parent_path());
  fs::remove_all(b);
}

TEST(EmitReport, OneEstimatorOneRowPerThreshold) {
  const fs::path dir = scratch("single");
  RunConfig c = parse(
      "num_sources = 1\nscene = 0\nduration = 1\nestimators = SC\n"
      "write_frames = false\n");
  emit_report(run(c), dir.string());
  EXPECT_EQ(read_csv(dir / "results.csv").size(), 3u);
  EXPECT_FALSE(fs::exists(dir / "frames.csv"));
  fs::remove_all(dir);
}

TEST(Simulate, WritesScenesAndLabels) {
  const fs::path dir = scratch("sim");
  RunConfig c = parse("scene = -40, 80 @ 5\nduration = 1\n");
  EXPECT_EQ(simulate(c, dir.string()), 1u);
  const fs::path sub = dir / "s0001";
  const WavData mix = read_wav((sub / "mixture.wav").string());
  EXPECT_EQ(mix.sample_rate, 16000.0);
  EXPECT_EQ(mix.channels.size(), 5u);
  EXPECT_EQ(mix.channels[0].size(), 16000u);
  EXPECT_TRUE(fs::exists(sub / "speech_1.wav"));
  EXPECT_TRUE(fs::exists(sub / "speech_2.wav"));
  EXPECT_TRUE(fs::exists(sub / "noise.wav"));
  const auto labels = read_csv(sub / "labels.csv");
  EXPECT_EQ(labels.size(), 1u + 61u * 257u);
  const auto index = read_csv(dir / "scenes.csv");
  ASSERT_EQ(index.size(), 2u);
  EXPECT_EQ(index[1][1], "-40;80");
  fs::remove_all(dir);
}

TEST(Wav, RoundTripFormats) {
  const fs::path dir = scratch("wav");
  fs::create_directories(dir);
  MultichannelSignal x(2, std::vector<double>(100));
  for (std::size_t t = 0; t < 100; ++t) {
    x[0][t] = 0.5 * std::sin(0.1 * static_cast<double>(t));
    x[1][t] = -0.25;
  }
  for (const auto [format, tol] :
       {std::pair{WavSampleFormat::kFloat32, 1e-7},
        std::pair{WavSampleFormat::kPcm24, 1e-6},
        std::pair{WavSampleFormat::kPcm16, 1e-4}}) {
    const std::string path = (dir / "x.wav").string();
    write_wav(path, {8000.0, x}, format);
    const WavData back = read_wav(path);
    EXPECT_EQ(back.sample_rate, 8000.0);
    ASSERT_EQ(back.channels.size(), 2u);
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t t = 0; t < 100; ++t) {
        EXPECT_NEAR(back.channels[m][t], x[m][t], tol);
      }
    }
  }
  const std::string a = (dir / "a.wav").string();
  const std::string b = (dir / "b.wav").string();
  write_wav(a, {8000.0, {x[0]}});
  write_wav(b, {8000.0, x});
  EXPECT_EQ(read_wav_set({a, b}).channels.size(), 3u);
  write_wav(b, {16000.0, x});
  EXPECT_THROW(read_wav_set({a, b}), Error);
  EXPECT_THROW(read_wav((dir / "missing.wav").string()), Error);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace bindoa
