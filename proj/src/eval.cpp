#include "bindoa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <fftw3.h>
#include <json.hpp>

#include "bindoa/version.hpp"
#include "bindoa/wav.hpp"

namespace bindoa {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kConfig, what);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || std::isnan(v)) {
    config_error("'" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

std::size_t to_size(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v < 0.0 || v != std::floor(v) || !std::isfinite(v)) {
    config_error("'" + key + "': expected a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  config_error("'" + key + "': expected true or false");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) config_error("'" + key + "': empty list");
  return out;
}

// "start:step:stop" or a comma list.
std::vector<double> to_range(const std::string& key, const std::string& text) {
  if (text.find(':') == std::string::npos) return to_list(key, text);
  const auto parts = split(text, ':');
  if (parts.size() != 3) config_error("'" + key + "': use start:step:stop");
  const double start = to_double(key, parts[0]);
  const double step = to_double(key, parts[1]);
  const double stop = to_double(key, parts[2]);
  if (!(step > 0.0) || stop < start) config_error("'" + key + "': bad range");
  std::vector<double> out;
  for (double v = start; v <= stop + 1e-9; v += step) out.push_back(v);
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "na";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string join(const std::vector<double>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += sep;
    out += format_number(values[i]);
  }
  return out;
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed * 0x100000001B3ULL + index + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string format_threshold(double threshold_db) {
  return format_number(threshold_db);
}

namespace {

struct ParsedGeometry {
  std::vector<Position> head;
  std::optional<Position> external;
};

ParsedGeometry parse_geometry_lines(std::istream& in) {
  ParsedGeometry g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    Position p{};
    if (!(ss >> p[0] >> p[1] >> p[2])) {
      config_error("geometry line " + std::to_string(line_no) +
                   ": expected '<head|external> x y z'");
    }
    if (kind == "head") {
      g.head.push_back(p);
    } else if (kind == "external") {
      if (g.external) config_error("geometry lists more than one external mic");
      g.external = p;
    } else {
      config_error("geometry line " + std::to_string(line_no) +
                   ": unknown kind '" + kind + "'");
    }
  }
  if (g.head.size() < 2) config_error("geometry needs at least two head mics");
  return g;
}

std::ifstream open_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open geometry file " + path);
  return in;
}

}  // namespace

std::vector<Position> parse_geometry(std::istream& in, bool require_external) {
  ParsedGeometry g = parse_geometry_lines(in);
  if (require_external && !g.external) {
    config_error("geometry needs an external microphone");
  }
  if (g.external) g.head.push_back(*g.external);
  return g.head;
}

std::vector<Position> load_geometry(const std::string& path,
                                    bool require_external) {
  std::ifstream in = open_geometry(path);
  return parse_geometry(in, require_external);
}

std::vector<Position> load_head_geometry(const std::string& path) {
  std::ifstream in = open_geometry(path);
  return parse_geometry_lines(in).head;
}

void RunConfig::validate() const {
  if (geometry.size() < 3) config_error("geometry needs head and external mics");
  pipeline.validate(geometry.size() - 1);
  if (scenes.empty()) config_error("no scenes configured");
  if (pipeline.spp_mode == SppMode::kOracle) {
    for (const auto& s : scenes) {
      if (s.is_wav()) {
        config_error("scene '" + s.id +
                     "' is recorded; oracle speech presence needs simulated "
                     "scenes (set spp_mode = estimated)");
      }
    }
  }
  for (const auto& s : scenes) {
    if (s.spec.azimuths.size() != pipeline.num_sources) {
      config_error("scene '" + s.id + "' has " +
                   std::to_string(s.spec.azimuths.size()) +
                   " speakers but num_sources = " +
                   std::to_string(pipeline.num_sources));
    }
  }
  if (!(convergence_skip >= 0.0)) config_error("convergence_skip < 0");
}

RunConfig parse_run_config(std::istream& in, const std::string& base_dir) {
  RunConfig config;
  PipelineConfig& p = config.pipeline;
  p.stft = StftConfig::for_rate(16000.0);
  p.thresholds_db = {-std::numeric_limits<double>::infinity(), 0.0};
  p.estimators = {RtfMethod::kCw, RtfMethod::kSc};
  p.num_sources = 2;

  double window_ms = 32.0;
  double external_distance = 1.0;
  std::string geometry_file;
  std::vector<double> snrs = {0.0};
  std::vector<double> sweep;
  double duration = 5.0;
  NoiseKind noise = NoiseKind::kDiffuse;
  NoiseSpectrum noise_spectrum = NoiseSpectrum::kPink;
  std::vector<std::string> scene_lines;
  std::vector<std::string> wav_lines;
  std::optional<std::vector<MicPair>> pairs;

  const auto resolve = [&](const std::string& path) {
    const fs::path candidate(path);
    return candidate.is_absolute() ? path : (fs::path(base_dir) / candidate).string();
  };

  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      config_error("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    config.echo.emplace_back(key, value);
    const bool repeatable = key == "scene" || key == "wav_scene";
    if (!repeatable && !seen.insert(key).second) {
      config_error("duplicate key '" + key + "'");
    }

    if (key == "sample_rate") {
      p.stft.sample_rate = to_double(key, value);
    } else if (key == "window_ms") {
      window_ms = to_double(key, value);
    } else if (key == "tau_y") {
      p.tau_y = to_double(key, value);
    } else if (key == "tau_u") {
      p.tau_u = to_double(key, value);
    } else if (key == "alpha") {
      p.coherence.alpha = to_double(key, value);
    } else if (key == "beta") {
      p.coherence.beta = to_double(key, value);
    } else if (key == "head_distance") {
      p.coherence.distance = to_double(key, value);
    } else if (key == "speed_of_sound") {
      p.coherence.speed_of_sound = to_double(key, value);
    } else if (key == "mic_pairs") {
      std::vector<MicPair> list;
      for (const auto& item : split(value, ',')) {
        const auto ends = split(item, '-');
        if (ends.size() != 2) config_error("mic_pairs: use i-j with 1-based i, j");
        const std::size_t i = to_size(key, ends[0]);
        const std::size_t j = to_size(key, ends[1]);
        if (i == 0 || j == 0) config_error("mic_pairs are 1-based");
        list.emplace_back(i - 1, j - 1);
      }
      pairs = std::move(list);
    } else if (key == "cdr_thresholds_db") {
      p.thresholds_db = to_list(key, value);
    } else if (key == "f_min") {
      p.f_min = to_double(key, value);
    } else if (key == "f_max") {
      p.f_max = to_double(key, value);
    } else if (key == "estimators") {
      p.estimators.clear();
      for (const auto& item : split(value, ',')) {
        if (item == "CW" || item == "cw") {
          p.estimators.push_back(RtfMethod::kCw);
        } else if (item == "SC" || item == "sc") {
          p.estimators.push_back(RtfMethod::kSc);
        } else if (!item.empty()) {
          config_error("unknown estimator '" + item + "'");
        }
      }
    } else if (key == "num_sources") {
      p.num_sources = to_size(key, value);
    } else if (key == "grid_resolution") {
      config.grid_resolution = to_double(key, value);
    } else if (key == "spp_mode") {
      if (value == "oracle") {
        p.spp_mode = SppMode::kOracle;
      } else if (value == "estimated") {
        p.spp_mode = SppMode::kEstimated;
      } else {
        config_error("spp_mode must be oracle or estimated");
      }
    } else if (key == "spp_threshold") {
      p.spp_threshold = to_double(key, value);
    } else if (key == "convergence_skip") {
      config.convergence_skip = to_double(key, value);
    } else if (key == "geometry_file") {
      geometry_file = resolve(value);
    } else if (key == "external_distance") {
      external_distance = to_double(key, value);
    } else if (key == "sweep_azimuths") {
      sweep = to_range(key, value);
    } else if (key == "snr_db") {
      snrs = to_list(key, value);
    } else if (key == "duration") {
      duration = to_double(key, value);
    } else if (key == "noise") {
      if (value == "diffuse") {
        noise = NoiseKind::kDiffuse;
      } else if (value == "none") {
        noise = NoiseKind::kNone;
      } else {
        config_error("noise must be diffuse or none");
      }
    } else if (key == "noise_spectrum") {
      if (value == "pink") {
        noise_spectrum = NoiseSpectrum::kPink;
      } else if (value == "white") {
        noise_spectrum = NoiseSpectrum::kWhite;
      } else {
        config_error("noise_spectrum must be pink or white");
      }
    } else if (key == "scene") {
      scene_lines.push_back(value);
    } else if (key == "wav_scene") {
      wav_lines.push_back(value);
    } else if (key == "seed") {
      config.seed = to_size(key, value);
    } else if (key == "output_dir") {
      config.output_dir = value;
    } else if (key == "threads") {
      config.threads = to_size(key, value);
    } else if (key == "write_frames") {
      config.write_frames = to_bool(key, value);
    } else {
      config_error("unknown key '" + key + "'");
    }
  }

  try {
    p.stft = StftConfig::for_rate(p.stft.sample_rate, window_ms / 1000.0);
    p.stft.validate();
  } catch (const Error& e) {
    config_error(std::string("STFT settings: ") + e.what());
  }
  config.geometry = geometry_file.empty() ? default_geometry(external_distance)
                                          : load_geometry(geometry_file, true);
  const std::size_t head = config.geometry.size() - 1;
  p.mic_pairs = pairs ? *pairs : SubsetCriterion::interaural_pairs(head);

  SceneSpec base;
  base.geometry = config.geometry;
  base.noise = noise;
  base.noise_spectrum = noise_spectrum;
  base.noise_model = p.coherence;
  base.duration = duration;
  base.sample_rate = p.stft.sample_rate;

  const auto add_scene = [&](std::vector<double> azimuths, double snr,
                             std::vector<std::string> wavs) {
    SceneEntry entry;
    entry.spec = base;
    entry.spec.azimuths = std::move(azimuths);
    entry.spec.snr_db = snr;
    entry.spec.seed = scene_seed(config.seed, config.scenes.size());
    entry.wav_paths = std::move(wavs);
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", config.scenes.size() + 1);
    entry.id = id;
    config.scenes.push_back(std::move(entry));
  };

  if (!sweep.empty()) {
    if (p.num_sources == 1) {
      for (const double snr : snrs) {
        for (const double a : sweep) add_scene({a}, snr, {});
      }
    } else if (p.num_sources == 2) {
      for (const double snr : snrs) {
        for (const double a : sweep) {
          for (const double b : sweep) {
            if (a != b) add_scene({a, b}, snr, {});
          }
        }
      }
    } else {
      config_error("sweep_azimuths supports num_sources of 1 or 2");
    }
  }
  for (const auto& text : scene_lines) {
    const auto at = text.find('@');
    const std::vector<double> az =
        to_list("scene", at == std::string::npos ? text : text.substr(0, at));
    const double snr =
        at == std::string::npos ? snrs.front() : to_double("scene", text.substr(at + 1));
    add_scene(az, snr, {});
  }
  for (const auto& text : wav_lines) {
    const auto bar = text.find('|');
    if (bar == std::string::npos) {
      config_error("wav_scene: use 'file.wav[;file2.wav] | az1, az2'");
    }
    std::vector<std::string> paths;
    for (const auto& path : split(text.substr(0, bar), ';')) {
      if (!path.empty()) paths.push_back(resolve(path));
    }
    if (paths.empty()) config_error("wav_scene lists no files");
    add_scene(to_list("wav_scene", text.substr(bar + 1)),
              std::numeric_limits<double>::quiet_NaN(), std::move(paths));
  }

  try {
    for (const auto& s : config.scenes) {
      if (!s.is_wav()) s.spec.validate();
    }
    config.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    config_error(e.what());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path);
  return parse_run_config(in, fs::path(path).parent_path().string().empty()
                                  ? "."
                                  : fs::path(path).parent_path().string());
}

const SummaryRow& EvalReport::find(RtfMethod estimator,
                                   double threshold_db) const {
  for (const auto& row : summary) {
    if (row.estimator == estimator && row.threshold_db == threshold_db) {
      return row;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "no such summary variant");
}

std::vector<EvalRow> evaluate_scene(const SceneEntry& scene,
                                    const RunConfig& config,
                                    const PrototypeDatabase& db) {
  const PipelineConfig& pc = config.pipeline;
  MultichannelSignal mixture;
  std::vector<std::vector<BinLabel>> labels;

  if (scene.is_wav()) {
    WavData wav = read_wav_set(scene.wav_paths);
    if (wav.sample_rate != pc.stft.sample_rate) {
      throw Error(ErrorCode::kInvalidArgument,
                  "WAV sample rate " + format_number(wav.sample_rate) +
                      " differs from the configured rate (no resampling)");
    }
    if (wav.channels.size() != config.geometry.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "WAV channel count does not match the geometry");
    }
    mixture = std::move(wav.channels);
  } else {
    SceneRender render = render_scene(scene.spec, pc.stft);
    mixture = std::move(render.mixture);
    for (std::size_t l = 0; l < render.oracle_labels.frames; ++l) {
      labels.push_back(render.oracle_labels.presence(l));
    }
  }

  const Spectrogram spec = analyze(mixture, pc.stft);
  FramePipeline pipeline(pc, db, mixture.size());
  const auto frames = pipeline.process_all(
      spec, pc.spp_mode == SppMode::kOracle ? &labels : nullptr);

  const std::vector<double>& truth = scene.spec.azimuths;
  const std::size_t nt = pc.thresholds_db.size();
  std::vector<EvalRow> rows;
  for (std::size_t e = 0; e < pc.estimators.size(); ++e) {
    for (std::size_t t = 0; t < nt; ++t) {
      EvalRow row;
      row.scene_id = scene.id;
      row.estimator = pc.estimators[e];
      row.threshold_db = pc.thresholds_db[t];
      row.snr_db = scene.spec.snr_db;
      row.truth = truth;
      double sum = 0.0;
      double sum_all = 0.0;
      for (const auto& fr : frames) {
        const double acc = accuracy(fr.at(e, t, nt).azimuths, truth);
        row.frame_acc.push_back(acc);
        sum_all += acc;
        const double start = static_cast<double>(fr.frame) * pc.stft.hop_seconds();
        if (start + 1e-12 >= config.convergence_skip) {
          sum += acc;
          ++row.frames_scored;
        }
      }
      row.frames_total = frames.size();
      row.mean_acc = row.frames_scored > 0
                         ? sum / static_cast<double>(row.frames_scored)
                         : 0.0;
      row.mean_acc_all = row.frames_total > 0
                             ? sum_all / static_cast<double>(row.frames_total)
                             : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<EvalRow>& rows,
                                  const RunConfig& config) {
  std::vector<SummaryRow> out;
  for (const RtfMethod e : config.pipeline.estimators) {
    for (const double t : config.pipeline.thresholds_db) {
      SummaryRow s;
      s.estimator = e;
      s.threshold_db = t;
      double weighted = 0.0;
      double weighted_all = 0.0;
      std::size_t frames_all = 0;
      for (const auto& r : rows) {
        if (r.estimator != e || r.threshold_db != t) continue;
        ++s.scenes;
        weighted += r.mean_acc * static_cast<double>(r.frames_scored);
        weighted_all += r.mean_acc_all * static_cast<double>(r.frames_total);
        s.frames += r.frames_scored;
        frames_all += r.frames_total;
      }
      s.mean_acc = s.frames > 0 ? weighted / static_cast<double>(s.frames) : 0.0;
      s.mean_acc_all =
          frames_all > 0 ? weighted_all / static_cast<double>(frames_all) : 0.0;
      out.push_back(s);
    }
  }
  return out;
}

EvalReport run(const RunConfig& config) {
  config.validate();
  std::vector<Position> head(config.geometry.begin(),
                             config.geometry.end() - 1);
  const PrototypeDatabase db =
      build_prototype_db(head, config.grid_resolution, config.pipeline.stft,
                         config.pipeline.coherence.speed_of_sound);

  const std::size_t n = config.scenes.size();
  std::vector<std::vector<EvalRow>> results(n);
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = evaluate_scene(config.scenes[i], config, db);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::size_t threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  EvalReport report;
  report.config = config;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      report.failures.push_back({config.scenes[i].id, *errors[i]});
      continue;
    }
    for (auto& row : results[i]) report.rows.push_back(std::move(row));
  }
  report.summary = summarize(report.rows, config);
  return report;
}

void emit_report(const EvalReport& report, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());

  const auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + name + " in " + dir);
    return out;
  };
  const bool frames = report.config.write_frames;

  {
    auto out = open("results.csv");
    out << "scene_id,estimator,cdr_threshold_db,snr_db,truth_deg,mean_acc,"
           "mean_acc_all_frames,frames_scored,frames_total,frame_series\n";
    for (const auto& r : report.rows) {
      out << r.scene_id << ',' << to_string(r.estimator) << ','
          << format_threshold(r.threshold_db) << ',' << format_number(r.snr_db)
          << ',' << join(r.truth, ';') << ',' << format_number(r.mean_acc)
          << ',' << format_number(r.mean_acc_all) << ',' << r.frames_scored
          << ',' << r.frames_total << ',' << (frames ? "frames.csv" : "")
          << '\n';
    }
    if (!out) throw Error(ErrorCode::kIo, "failed writing results.csv");
  }
  {
    auto out = open("summary.csv");
    out << "estimator,cdr_threshold_db,mean_acc,mean_acc_all_frames,scenes,"
           "frames\n";
    for (const auto& s : report.summary) {
      out << to_string(s.estimator) << ',' << format_threshold(s.threshold_db)
          << ',' << format_number(s.mean_acc) << ','
          << format_number(s.mean_acc_all) << ',' << s.scenes << ','
          << s.frames << '\n';
    }
    if (!out) throw Error(ErrorCode::kIo, "failed writing summary.csv");
  }
  if (frames) {
    auto out = open("frames.csv");
    out << "scene_id,estimator,cdr_threshold_db,frame,acc\n";
    for (const auto& r : report.rows) {
      for (std::size_t l = 0; l < r.frame_acc.size(); ++l) {
        out << r.scene_id << ',' << to_string(r.estimator) << ','
            << format_threshold(r.threshold_db) << ',' << l << ','
            << format_number(r.frame_acc[l]) << '\n';
      }
    }
    if (!out) throw Error(ErrorCode::kIo, "failed writing frames.csv");
  }
  {
    nlohmann::ordered_json meta;
    meta["tool"] = "bindoa";
    meta["version"] = kVersion;
    meta["seed"] = report.config.seed;
    meta["fftw"] = std::string(fftw_version);
    meta["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION);
    auto& cfg = meta["config"];
    cfg = nlohmann::ordered_json::array();
    for (const auto& [k, v] : report.config.echo) {
      cfg.push_back({{"key", k}, {"value", v}});
    }
    meta["scenes"] = report.config.scenes.size();
    meta["convergence_skip_s"] = report.config.convergence_skip;
    auto& failed = meta["failed_scenes"];
    failed = nlohmann::ordered_json::array();
    for (const auto& f : report.failures) {
      failed.push_back({{"scene_id", f.scene_id}, {"error", f.message}});
    }
    auto out = open("run_meta.json");
    out << meta.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIo, "failed writing run_meta.json");
  }
}

}  // namespace bindoa

namespace bindoa {

std::size_t simulate(const RunConfig& config, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  std::ofstream index(fs::path(dir) / "scenes.csv");
  if (!index) throw Error(ErrorCode::kIo, "cannot write scenes.csv in " + dir);
  index << "scene_id,truth_deg,snr_db,seed,frames,bins\n";

  std::size_t written = 0;
  for (const auto& scene : config.scenes) {
    if (scene.is_wav()) continue;
    const SceneRender render = render_scene(scene.spec, config.pipeline.stft);
    const fs::path sub = fs::path(dir) / scene.id;
    fs::create_directories(sub, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + sub.string());
    const double rate = scene.spec.sample_rate;
    write_wav((sub / "mixture.wav").string(), {rate, render.mixture});
    for (std::size_t j = 0; j < render.speech.size(); ++j) {
      write_wav((sub / ("speech_" + std::to_string(j + 1) + ".wav")).string(),
                {rate, render.speech[j]});
    }
    write_wav((sub / "noise.wav").string(), {rate, render.noise});

    std::ofstream labels(sub / "labels.csv");
    if (!labels) throw Error(ErrorCode::kIo, "cannot write labels.csv");
    labels << "frame,bin,label\n";
    const OracleLabels& ol = render.oracle_labels;
    for (std::size_t l = 0; l < ol.frames; ++l) {
      for (std::size_t k = 0; k < ol.bins; ++k) {
        const int v = ol.at(k, l);
        labels << l << ',' << k << ','
               << (v == kNoiseOnlyLabel ? std::string("noise")
                                        : "speaker_" + std::to_string(v + 1))
               << '\n';
      }
    }
    index << scene.id << ',' << join(scene.spec.azimuths, ';') << ','
          << format_number(scene.spec.snr_db) << ',' << scene.spec.seed << ','
          << ol.frames << ',' << ol.bins << '\n';
    ++written;
  }
  return written;
}

}  // namespace bindoa
