#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bindoa/doa.hpp"
#include "bindoa/rtf.hpp"
#include "bindoa/spatial_stats.hpp"
#include "bindoa/stft.hpp"

namespace bindoa {

enum class SppMode { kOracle, kEstimated };

struct PipelineConfig {
  StftConfig stft;
  CoherenceModel coherence;
  std::vector<MicPair> mic_pairs;  // zero-based head channel indices
  double tau_y = 0.25;
  double tau_u = 0.5;
  double f_min = 100.0;
  double f_max = 8000.0;
  std::vector<double> thresholds_db;
  std::vector<RtfMethod> estimators;
  SppMode spp_mode = SppMode::kOracle;
  double spp_threshold = 0.5;
  std::size_t num_sources = 1;

  void validate(std::size_t num_head_channels) const;
};

/// DOA picks for every (estimator, threshold) variant of one frame, stored
/// estimator-major.
struct FrameResult {
  std::size_t frame = 0;
  std::vector<DoaEstimate> doas;
  std::vector<std::size_t> contributing_bins;

  const DoaEstimate& at(std::size_t estimator, std::size_t threshold,
                        std::size_t num_thresholds) const {
    return doas[estimator * num_thresholds + threshold];
  }
};

/// Causal frame-by-frame localizer: speech presence, covariance tracking,
/// CDR subset selection, RTF estimation, spatial spectrum, peak picking.
/// All variants share one covariance state.
class FramePipeline {
 public:
  FramePipeline(PipelineConfig config, const PrototypeDatabase& db,
                std::size_t num_channels);

  const PipelineConfig& config() const { return config_; }
  std::size_t frames_processed() const { return frame_index_; }
  const CovarianceState* state() const {
    return state_ ? &*state_ : nullptr;
  }

  /// frame[m][k]: channel m, bin k. oracle_labels is required in oracle
  /// mode and ignored otherwise.
  FrameResult process(std::span<const std::span<const Complex>> frame,
                      std::span<const BinLabel> oracle_labels = {});

  /// Runs process() over every frame of a spectrogram.
  std::vector<FrameResult> process_all(
      const Spectrogram& spec,
      const std::vector<std::vector<BinLabel>>* oracle_labels = nullptr);

 private:
  PipelineConfig config_;
  const PrototypeDatabase& db_;
  std::size_t num_channels_;
  std::size_t first_bin_ = 0;
  std::size_t last_bin_ = 0;
  std::vector<double> gamma_u_;
  std::vector<double> proto_inv_norm_;
  std::optional<CovarianceState> state_;
  std::optional<NoisePsdTracker> noise_;
  std::size_t frame_index_ = 0;
};

}  // namespace bindoa
