#include "bindoa/bindoa.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "bindoa/doa.hpp"
#include "bindoa/eval.hpp"
#include "bindoa/pipeline.hpp"
#include "bindoa/rtf.hpp"
#include "bindoa/spatial_stats.hpp"
#include "bindoa/version.hpp"

struct bindoa_protodb {
  bindoa::PrototypeDatabase db;
};

struct bindoa_localizer {
  bindoa::PrototypeDatabase db;
  std::unique_ptr<bindoa::FramePipeline> pipeline;
  std::size_t channels = 0;
  std::vector<bindoa::Complex> buffer;
  std::vector<bindoa::BinLabel> labels;
};

namespace {

thread_local std::string last_error;

bindoa_status to_status(bindoa::ErrorCode code) {
  using bindoa::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return BINDOA_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch:
      return BINDOA_ERR_DIMENSION;
    case ErrorCode::kNumerical:
      return BINDOA_ERR_NUMERICAL;
    case ErrorCode::kConfig:
      return BINDOA_ERR_CONFIG;
    case ErrorCode::kIo:
      return BINDOA_ERR_IO;
  }
  return BINDOA_ERR_INTERNAL;
}

template <typename Fn>
bindoa_status guarded(Fn&& fn) {
  try {
    fn();
    return BINDOA_OK;
  } catch (const bindoa::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return BINDOA_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return BINDOA_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw bindoa::Error(bindoa::ErrorCode::kInvalidArgument, what);
}

bindoa::CMatrix read_matrix(const double* data, std::size_t n) {
  bindoa::CMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double* p = data + 2 * (i * n + j);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = {p[0], p[1]};
    }
  }
  return m;
}

std::vector<bindoa::Complex> read_vector(const double* data, std::size_t n) {
  std::vector<bindoa::Complex> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = {data[2 * i], data[2 * i + 1]};
  return v;
}

}  // namespace

extern "C" {

const char* bindoa_version(void) { return bindoa::kVersion; }

const char* bindoa_last_error(void) { return last_error.c_str(); }

const char* bindoa_status_name(bindoa_status status) {
  switch (status) {
    case BINDOA_OK:
      return "ok";
    case BINDOA_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case BINDOA_ERR_DIMENSION:
      return "dimension mismatch";
    case BINDOA_ERR_NUMERICAL:
      return "numerical failure";
    case BINDOA_ERR_CONFIG:
      return "configuration error";
    case BINDOA_ERR_IO:
      return "I/O error";
    case BINDOA_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

bindoa_status bindoa_protodb_build(const double* positions, size_t num_mics,
                                   double resolution_deg, double sample_rate,
                                   size_t window_len, double speed_of_sound,
                                   bindoa_protodb** out) {
  return guarded([&] {
    require(positions != nullptr && out != nullptr, "null argument");
    std::vector<bindoa::Position> geometry(num_mics);
    for (size_t m = 0; m < num_mics; ++m) {
      geometry[m] = {positions[3 * m], positions[3 * m + 1],
                     positions[3 * m + 2]};
    }
    bindoa::StftConfig config;
    config.sample_rate = sample_rate;
    config.window_len = window_len;
    config.hop = window_len / 2;
    auto handle = std::make_unique<bindoa_protodb>();
    handle->db = bindoa::build_prototype_db(geometry, resolution_deg, config,
                                            speed_of_sound);
    *out = handle.release();
  });
}

bindoa_status bindoa_protodb_load(const char* path, bindoa_protodb** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    std::ifstream in(path);
    if (!in) {
      throw bindoa::Error(bindoa::ErrorCode::kIo,
                          std::string("cannot open ") + path);
    }
    auto handle = std::make_unique<bindoa_protodb>();
    handle->db = bindoa::PrototypeDatabase::load(in);
    *out = handle.release();
  });
}

bindoa_status bindoa_protodb_save(const bindoa_protodb* db, const char* path) {
  return guarded([&] {
    require(db != nullptr && path != nullptr, "null argument");
    std::ofstream out(path);
    if (!out) {
      throw bindoa::Error(bindoa::ErrorCode::kIo,
                          std::string("cannot write ") + path);
    }
    db->db.save(out);
  });
}

size_t bindoa_protodb_num_directions(const bindoa_protodb* db) {
  return db == nullptr ? 0 : db->db.num_directions();
}

size_t bindoa_protodb_num_bins(const bindoa_protodb* db) {
  return db == nullptr ? 0 : db->db.num_bins();
}

size_t bindoa_protodb_num_mics(const bindoa_protodb* db) {
  return db == nullptr ? 0 : db->db.num_mics();
}

bindoa_status bindoa_protodb_vector(const bindoa_protodb* db, size_t direction,
                                    size_t bin, double* out) {
  return guarded([&] {
    require(db != nullptr && out != nullptr, "null argument");
    require(direction < db->db.num_directions() && bin < db->db.num_bins(),
            "direction or bin out of range");
    const auto v = db->db.vector(direction, bin);
    for (size_t m = 0; m < v.size(); ++m) {
      out[2 * m] = v[m].real();
      out[2 * m + 1] = v[m].imag();
    }
  });
}

void bindoa_protodb_destroy(bindoa_protodb* db) { delete db; }

bindoa_status bindoa_protodb_from_geometry_file(const char* geometry_path,
                                                double resolution_deg,
                                                double sample_rate,
                                                size_t window_len,
                                                double speed_of_sound,
                                                const char* out_path) {
  return guarded([&] {
    require(geometry_path != nullptr && out_path != nullptr, "null argument");
    const auto geometry = bindoa::load_head_geometry(geometry_path);
    bindoa::StftConfig config;
    config.sample_rate = sample_rate;
    config.window_len = window_len;
    config.hop = window_len / 2;
    const auto db = bindoa::build_prototype_db(geometry, resolution_deg, config,
                                               speed_of_sound);
    std::ofstream out(out_path);
    if (!out) {
      throw bindoa::Error(bindoa::ErrorCode::kIo,
                          std::string("cannot write ") + out_path);
    }
    db.save(out);
  });
}

double bindoa_diffuse_coherence(double alpha, double beta, double distance,
                                double speed_of_sound, double frequency_hz) {
  bindoa::CoherenceModel model{alpha, beta, distance, speed_of_sound};
  return model.at_omega(2.0 * bindoa::kPi * frequency_hz);
}

bindoa_status bindoa_cdr(double gamma_y_re, double gamma_y_im, double gamma_u,
                         double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = bindoa::cdr({gamma_y_re, gamma_y_im}, gamma_u);
  });
}

bindoa_status bindoa_estimate_rtf(bindoa_estimator estimator,
                                  const double* phi_y, const double* phi_u,
                                  size_t num_channels, double* g_out,
                                  int* valid, uint64_t* flops) {
  return guarded([&] {
    require(phi_y != nullptr && g_out != nullptr && valid != nullptr,
            "null argument");
    require(num_channels >= 2, "need at least two channels");
    bindoa::FlopCounter counter;
    bindoa::RtfEstimate est;
    if (estimator == BINDOA_ESTIMATOR_CW) {
      require(phi_u != nullptr, "CW needs phi_u");
      est = bindoa::estimate_rtf_cw(read_matrix(phi_y, num_channels),
                                    read_matrix(phi_u, num_channels), &counter);
    } else if (estimator == BINDOA_ESTIMATOR_SC) {
      est = bindoa::estimate_rtf_sc(read_matrix(phi_y, num_channels), &counter);
    } else {
      require(false, "unknown estimator");
    }
    for (Eigen::Index m = 0; m < est.g_h.size(); ++m) {
      g_out[2 * m] = est.g_h(m).real();
      g_out[2 * m + 1] = est.g_h(m).imag();
    }
    *valid = est.valid ? 1 : 0;
    if (flops != nullptr) *flops = counter.flops;
  });
}

bindoa_status bindoa_hermitian_angle(const double* estimate,
                                     const double* prototype, size_t length,
                                     double* out) {
  return guarded([&] {
    require(estimate != nullptr && prototype != nullptr && out != nullptr,
            "null argument");
    *out = bindoa::hermitian_angle(read_vector(estimate, length),
                                   read_vector(prototype, length));
  });
}

void bindoa_localizer_config_default(bindoa_localizer_config* cfg) {
  if (cfg == nullptr) return;
  cfg->sample_rate = 16000.0;
  cfg->window_len = 512;
  cfg->tau_y = 0.25;
  cfg->tau_u = 0.5;
  cfg->alpha = 0.5;
  cfg->beta = 2.2;
  cfg->head_distance = 0.18;
  cfg->speed_of_sound = 343.0;
  cfg->cdr_threshold_db = 0.0;
  cfg->f_min = 100.0;
  cfg->f_max = 8000.0;
  cfg->estimator = BINDOA_ESTIMATOR_SC;
  cfg->num_sources = 1;
  cfg->oracle_spp = 0;
  cfg->spp_threshold = 0.5;
}

bindoa_status bindoa_localizer_create(const bindoa_localizer_config* cfg,
                                      const bindoa_protodb* db,
                                      size_t num_channels, const size_t* pairs,
                                      size_t num_pairs,
                                      bindoa_localizer** out) {
  return guarded([&] {
    require(cfg != nullptr && db != nullptr && out != nullptr, "null argument");
    require(cfg->estimator == BINDOA_ESTIMATOR_CW ||
                cfg->estimator == BINDOA_ESTIMATOR_SC,
            "unknown estimator");
    bindoa::PipelineConfig pc;
    pc.stft.sample_rate = cfg->sample_rate;
    pc.stft.window_len = cfg->window_len;
    pc.stft.hop = cfg->window_len / 2;
    pc.tau_y = cfg->tau_y;
    pc.tau_u = cfg->tau_u;
    pc.coherence = {cfg->alpha, cfg->beta, cfg->head_distance,
                    cfg->speed_of_sound};
    pc.thresholds_db = {cfg->cdr_threshold_db};
    pc.f_min = cfg->f_min;
    pc.f_max = cfg->f_max;
    pc.estimators = {cfg->estimator == BINDOA_ESTIMATOR_CW
                         ? bindoa::RtfMethod::kCw
                         : bindoa::RtfMethod::kSc};
    pc.num_sources = cfg->num_sources;
    pc.spp_mode = cfg->oracle_spp != 0 ? bindoa::SppMode::kOracle
                                       : bindoa::SppMode::kEstimated;
    pc.spp_threshold = cfg->spp_threshold;
    if (pairs == nullptr) {
      require(num_channels >= 3, "need at least two head channels");
      pc.mic_pairs = bindoa::SubsetCriterion::interaural_pairs(num_channels - 1);
    } else {
      for (size_t p = 0; p < num_pairs; ++p) {
        pc.mic_pairs.emplace_back(pairs[2 * p], pairs[2 * p + 1]);
      }
    }
    auto handle = std::make_unique<bindoa_localizer>();
    handle->db = db->db;
    handle->channels = num_channels;
    handle->pipeline =
        std::make_unique<bindoa::FramePipeline>(pc, handle->db, num_channels);
    *out = handle.release();
  });
}

bindoa_status bindoa_localizer_process(bindoa_localizer* loc,
                                       const double* frame,
                                       const uint8_t* labels,
                                       double* azimuths_out,
                                       size_t* contributing_bins) {
  return guarded([&] {
    require(loc != nullptr && frame != nullptr && azimuths_out != nullptr,
            "null argument");
    const auto& pc = loc->pipeline->config();
    const size_t bins = pc.stft.num_bins();
    loc->buffer = read_vector(frame, loc->channels * bins);
    std::vector<std::span<const bindoa::Complex>> channels;
    for (size_t m = 0; m < loc->channels; ++m) {
      channels.emplace_back(loc->buffer.data() + m * bins, bins);
    }
    std::span<const bindoa::BinLabel> label_span;
    if (pc.spp_mode == bindoa::SppMode::kOracle) {
      require(labels != nullptr, "oracle mode needs labels");
      loc->labels.resize(bins);
      for (size_t k = 0; k < bins; ++k) {
        loc->labels[k] = labels[k] != 0 ? bindoa::BinLabel::kSpeechAndNoise
                                        : bindoa::BinLabel::kNoiseOnly;
      }
      label_span = loc->labels;
    }
    const auto result = loc->pipeline->process(channels, label_span);
    const auto& doa = result.doas.front();
    for (size_t j = 0; j < doa.azimuths.size(); ++j) {
      azimuths_out[j] = doa.azimuths[j];
    }
    if (contributing_bins != nullptr) {
      *contributing_bins = result.contributing_bins.front();
    }
  });
}

void bindoa_localizer_destroy(bindoa_localizer* loc) { delete loc; }

bindoa_status bindoa_run_config_file(const char* config_path,
                                     const char* out_dir,
                                     size_t* failed_scenes) {
  return guarded([&] {
    require(config_path != nullptr, "null config path");
    bindoa::RunConfig config = bindoa::load_run_config(config_path);
    if (out_dir != nullptr) config.output_dir = out_dir;
    const bindoa::EvalReport report = bindoa::run(config);
    bindoa::emit_report(report, config.output_dir);
    if (failed_scenes != nullptr) *failed_scenes = report.failures.size();
  });
}

bindoa_status bindoa_simulate_spec_file(const char* spec_path,
                                        const char* out_dir) {
  return guarded([&] {
    require(spec_path != nullptr && out_dir != nullptr, "null argument");
    const bindoa::RunConfig config = bindoa::load_run_config(spec_path);
    bindoa::simulate(config, out_dir);
  });
}

}  // extern "C"
