#include "bindoa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bindoa {

namespace {

constexpr double kInitialLoading = 1e-6;

bool is_minus_inf(double v) {
  return v == -std::numeric_limits<double>::infinity();
}

}  // namespace

void PipelineConfig::validate(std::size_t num_head_channels) const {
  stft.validate();
  coherence.validate();
  if (estimators.empty()) {
    throw Error(ErrorCode::kConfig, "at least one estimator is required");
  }
  if (thresholds_db.empty()) {
    throw Error(ErrorCode::kConfig, "at least one CDR threshold is required");
  }
  if (mic_pairs.empty()) {
    throw Error(ErrorCode::kConfig, "microphone pair set is empty");
  }
  SubsetCriterion criterion{0.0, mic_pairs};
  for (const double t : thresholds_db) {
    criterion.cdr_threshold_db = t;
    criterion.validate(num_head_channels);
  }
  if (!(tau_y > 0.0) || !(tau_u > 0.0)) {
    throw Error(ErrorCode::kConfig, "time constants must be positive");
  }
  if (!(f_min >= 0.0) || !(f_max > f_min)) {
    throw Error(ErrorCode::kConfig, "frequency range is empty");
  }
  if (num_sources == 0) {
    throw Error(ErrorCode::kConfig, "number of sources must be at least 1");
  }
}

FramePipeline::FramePipeline(PipelineConfig config, const PrototypeDatabase& db,
                             std::size_t num_channels)
    : config_(std::move(config)), db_(db), num_channels_(num_channels) {
  if (num_channels_ < 3 || db_.num_mics() != num_channels_ - 1) {
    throw Error(ErrorCode::kDimensionMismatch,
                "database must cover all head channels (channels - 1)");
  }
  config_.validate(num_channels_ - 1);
  const StftConfig& stft = config_.stft;
  if (db_.num_bins() != stft.num_bins() ||
      db_.config().sample_rate != stft.sample_rate) {
    throw Error(ErrorCode::kDimensionMismatch,
                "database STFT layout does not match the pipeline");
  }
  if (config_.num_sources > db_.num_directions()) {
    throw Error(ErrorCode::kConfig, "more sources than grid directions");
  }
  const double df = stft.sample_rate / static_cast<double>(stft.window_len);
  first_bin_ = static_cast<std::size_t>(std::ceil(config_.f_min / df - 1e-9));
  last_bin_ = std::min(
      static_cast<std::size_t>(std::floor(config_.f_max / df + 1e-9)),
      stft.num_bins() - 1);
  if (first_bin_ > last_bin_) {
    throw Error(ErrorCode::kConfig, "frequency range contains no bins");
  }

  gamma_u_.resize(stft.num_bins());
  for (std::size_t k = 0; k < gamma_u_.size(); ++k) {
    gamma_u_[k] = diffuse_coherence(config_.coherence, k, stft);
  }
  proto_inv_norm_.resize(db_.num_directions() * db_.num_bins());
  for (std::size_t i = 0; i < db_.num_directions(); ++i) {
    for (std::size_t k = 0; k < db_.num_bins(); ++k) {
      double n2 = 0.0;
      for (const Complex& v : db_.vector(i, k)) n2 += std::norm(v);
      proto_inv_norm_[i * db_.num_bins() + k] = 1.0 / std::sqrt(n2);
    }
  }
}

FrameResult FramePipeline::process(
    std::span<const std::span<const Complex>> frame,
    std::span<const BinLabel> oracle_labels) {
  const std::size_t bins = config_.stft.num_bins();
  if (frame.size() != num_channels_) {
    throw Error(ErrorCode::kDimensionMismatch, "frame channel count mismatch");
  }
  for (const auto& channel : frame) {
    if (channel.size() != bins) {
      throw Error(ErrorCode::kDimensionMismatch, "frame bin count mismatch");
    }
  }
  const std::size_t head = num_channels_ - 1;

  std::vector<BinLabel> labels;
  if (config_.spp_mode == SppMode::kOracle) {
    if (oracle_labels.size() != bins) {
      throw Error(ErrorCode::kInvalidArgument,
                  "oracle mode needs one label per bin");
    }
    labels = speech_presence_oracle(oracle_labels);
  } else {
    if (!noise_) {
      noise_.emplace(num_channels_, bins,
                     smoothing_factor(config_.stft.hop_seconds(),
                                      config_.tau_u));
      noise_->initialize(frame);
    }
    std::vector<std::span<const double>> psd;
    for (std::size_t m = 0; m < num_channels_; ++m) psd.push_back(noise_->psd(m));
    labels = speech_presence(frame, psd, head, config_.spp_threshold);
    noise_->observe(frame, labels);
  }

  if (!state_) {
    double power = 0.0;
    for (const auto& channel : frame) {
      for (const Complex& v : channel) power += std::norm(v);
    }
    power /= static_cast<double>(num_channels_ * bins);
    const double epsilon =
        power > 0.0 ? kInitialLoading * power
                    : std::numeric_limits<double>::min() * 1e10;
    state_.emplace(bins, num_channels_,
                   smoothing_factor(config_.stft.hop_seconds(), config_.tau_y),
                   smoothing_factor(config_.stft.hop_seconds(), config_.tau_u),
                   epsilon);
  }
  update_covariance(*state_, frame, labels);

  const std::size_t num_thresholds = config_.thresholds_db.size();
  const std::size_t variants = config_.estimators.size() * num_thresholds;
  const std::size_t directions = db_.num_directions();
  std::vector<std::vector<double>> scores(variants,
                                          std::vector<double>(directions, 0.0));
  FrameResult result;
  result.frame = frame_index_;
  result.contributing_bins.assign(variants, 0);

  const bool need_cdr =
      std::any_of(config_.thresholds_db.begin(), config_.thresholds_db.end(),
                  [](double t) { return !is_minus_inf(t); });
  std::vector<bool> passes(num_thresholds);
  std::vector<double> angles(directions);

  for (std::size_t k = first_bin_; k <= last_bin_; ++k) {
    if (state_->frames_seen_y(k) == 0) continue;
    double value = 0.0;
    bool defined = true;
    if (need_cdr) {
      if (std::abs(gamma_u_[k]) < 1.0) {
        try {
          value = bin_cdr(*state_, k, config_.mic_pairs, gamma_u_[k]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNumerical) throw;
          defined = false;
        }
      } else {
        defined = false;
      }
    }
    bool any = false;
    for (std::size_t t = 0; t < num_thresholds; ++t) {
      const double thr = config_.thresholds_db[t];
      passes[t] = is_minus_inf(thr) || (defined && cdr_passes(value, thr));
      any = any || passes[t];
    }
    if (!any) continue;

    for (std::size_t e = 0; e < config_.estimators.size(); ++e) {
      RtfEstimate est;
      try {
        est = config_.estimators[e] == RtfMethod::kCw
                  ? estimate_rtf_cw(state_->phi_y(k), state_->phi_u(k))
                  : estimate_rtf_sc(state_->phi_y(k));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kNumerical) throw;
        continue;
      }
      if (!est.valid) continue;
      const double g_norm = est.g_h.norm();
      if (!(g_norm > 0.0)) continue;
      const double inv_g = 1.0 / g_norm;
      for (std::size_t i = 0; i < directions; ++i) {
        const auto proto = db_.vector(i, k);
        Complex inner{0.0, 0.0};
        for (std::size_t m = 0; m < head; ++m) {
          inner += std::conj(proto[m]) * est.g_h(static_cast<Eigen::Index>(m));
        }
        const double c = std::clamp(
            std::abs(inner) * inv_g * proto_inv_norm_[i * db_.num_bins() + k],
            0.0, 1.0);
        angles[i] = std::acos(c);
      }
      for (std::size_t t = 0; t < num_thresholds; ++t) {
        if (!passes[t]) continue;
        auto& s = scores[e * num_thresholds + t];
        for (std::size_t i = 0; i < directions; ++i) s[i] -= angles[i];
        ++result.contributing_bins[e * num_thresholds + t];
      }
    }
  }

  result.doas.reserve(variants);
  for (std::size_t v = 0; v < variants; ++v) {
    DoaEstimate doa = pick_peaks(scores[v], config_.num_sources);
    for (const std::size_t i : doa.indices) {
      doa.azimuths.push_back(db_.direction(i));
    }
    doa.frame = frame_index_;
    result.doas.push_back(std::move(doa));
  }
  ++frame_index_;
  return result;
}

std::vector<FrameResult> FramePipeline::process_all(
    const Spectrogram& spec,
    const std::vector<std::vector<BinLabel>>* oracle_labels) {
  std::vector<FrameResult> out;
  out.reserve(spec.num_frames());
  std::vector<std::span<const Complex>> frame(spec.num_channels());
  for (std::size_t l = 0; l < spec.num_frames(); ++l) {
    for (std::size_t m = 0; m < spec.num_channels(); ++m) {
      frame[m] = spec.frame(m, l);
    }
    std::span<const BinLabel> labels;
    if (oracle_labels != nullptr) labels = (*oracle_labels)[l];
    out.push_back(process(frame, labels));
  }
  return out;
}

}  // namespace bindoa
