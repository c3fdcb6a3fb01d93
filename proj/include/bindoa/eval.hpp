#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "bindoa/doa.hpp"
#include "bindoa/pipeline.hpp"
#include "bindoa/scene.hpp"

namespace bindoa {

/// One scene of an evaluation run: either simulated from `spec` or read
/// from WAV files with known speaker azimuths.
struct SceneEntry {
  std::string id;
  SceneSpec spec;
  std::vector<std::string> wav_paths;  // non-empty for recorded scenes

  bool is_wav() const { return !wav_paths.empty(); }
};

struct RunConfig {
  PipelineConfig pipeline;
  std::vector<Position> geometry = default_geometry();
  double grid_resolution = 5.0;
  double convergence_skip = 0.5;  // seconds excluded from the main mean
  std::vector<SceneEntry> scenes;
  std::string output_dir = "results";
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency
  bool write_frames = true;
  /// Echo of the parsed key/value pairs, in file order.
  std::vector<std::pair<std::string, std::string>> echo;

  void validate() const;
};

/// Parses the key/value run configuration. Throws Error(kConfig).
/// Relative paths inside the file resolve against `base_dir`.
RunConfig parse_run_config(std::istream& in, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

/// Reads a geometry file: lines `head x y z` and `external x y z` (meters).
/// Head microphones keep file order; the external one is appended last.
std::vector<Position> load_geometry(const std::string& path,
                                    bool require_external);
std::vector<Position> parse_geometry(std::istream& in, bool require_external);
/// Head microphones of a geometry file; any external line is ignored.
std::vector<Position> load_head_geometry(const std::string& path);

struct EvalRow {
  std::string scene_id;
  RtfMethod estimator = RtfMethod::kSc;
  double threshold_db = 0.0;
  double snr_db = 0.0;
  std::vector<double> truth;
  double mean_acc = 0.0;      // frames after the convergence window
  double mean_acc_all = 0.0;  // every frame
  std::size_t frames_scored = 0;
  std::size_t frames_total = 0;
  std::vector<double> frame_acc;
};

struct SummaryRow {
  RtfMethod estimator = RtfMethod::kSc;
  double threshold_db = 0.0;
  double mean_acc = 0.0;  // frame-count weighted
  double mean_acc_all = 0.0;
  std::size_t scenes = 0;
  std::size_t frames = 0;
};

struct SceneFailure {
  std::string scene_id;
  std::string message;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<SceneFailure> failures;
  RunConfig config;

  /// Summary row for a variant; throws when absent.
  const SummaryRow& find(RtfMethod estimator, double threshold_db) const;
};

/// Evaluates one scene for every (estimator, threshold) variant.
std::vector<EvalRow> evaluate_scene(const SceneEntry& scene,
                                    const RunConfig& config,
                                    const PrototypeDatabase& db);

/// Aggregates rows into the estimator x threshold table.
std::vector<SummaryRow> summarize(const std::vector<EvalRow>& rows,
                                  const RunConfig& config);

/// Runs every scene (in parallel across scenes). A scene that fails is
/// recorded and skipped. Deterministic for a fixed config.
EvalReport run(const RunConfig& config);

/// Writes results.csv, summary.csv, frames.csv (optional) and
/// run_meta.json into `dir`, creating it when missing.
void emit_report(const EvalReport& report, const std::string& dir);

/// Renders every simulated scene of the config into `dir`/<scene id>/:
/// mixture.wav, speech_<j>.wav, noise.wav (float32) and labels.csv, plus
/// an index scenes.csv. Returns the number of scenes written.
std::size_t simulate(const RunConfig& config, const std::string& dir);

/// Threshold rendered the way reports print it ("-inf" or "%g").
std::string format_threshold(double threshold_db);

}  // namespace bindoa
