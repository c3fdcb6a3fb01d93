#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "bindoa/common.hpp"
#include "bindoa/stft.hpp"

namespace bindoa {

enum class BinLabel : std::uint8_t { kNoiseOnly = 0, kSpeechAndNoise = 1 };

/// Smoothing factor for a recursive average with time constant tau_seconds
/// updated every hop_seconds.
double smoothing_factor(double hop_seconds, double tau_seconds);

/// Recursive per-bin estimates of the noisy and undesired covariance
/// matrices. Initialized to epsilon * I.
class CovarianceState {
 public:
  CovarianceState(std::size_t num_bins, std::size_t num_channels,
                  double lambda_y, double lambda_u, double epsilon);

  std::size_t num_bins() const { return phi_y_.size(); }
  std::size_t num_channels() const { return channels_; }
  double lambda_y() const { return lambda_y_; }
  double lambda_u() const { return lambda_u_; }

  const CMatrix& phi_y(std::size_t bin) const { return phi_y_[bin]; }
  const CMatrix& phi_u(std::size_t bin) const { return phi_u_[bin]; }
  CMatrix& phi_y(std::size_t bin) { return phi_y_[bin]; }
  CMatrix& phi_u(std::size_t bin) { return phi_u_[bin]; }
  std::size_t frames_seen_y(std::size_t bin) const { return seen_y_[bin]; }
  std::size_t frames_seen_u(std::size_t bin) const { return seen_u_[bin]; }

  /// Rank-one update of one bin: phi_y for speech-and-noise, phi_u
  /// otherwise. Only the upper triangle is computed; the lower one is
  /// mirrored so the result is exactly Hermitian.
  void update_bin(std::size_t bin, std::span<const Complex> snapshot,
                  BinLabel label);

 private:
  std::size_t channels_;
  double lambda_y_;
  double lambda_u_;
  std::vector<CMatrix> phi_y_;
  std::vector<CMatrix> phi_u_;
  std::vector<std::size_t> seen_y_;
  std::vector<std::size_t> seen_u_;
};

/// Applies update_bin to every bin of one frame. frame[m][k] is channel m,
/// bin k; labels has one entry per bin.
void update_covariance(CovarianceState& state,
                       std::span<const std::span<const Complex>> frame,
                       std::span<const BinLabel> labels);

/// Simplified a-posteriori-SNR presence detector. Per head channel the score
/// is 1 - exp(-max(|y|^2 / noise_psd - 1, 0)); the mean over head channels
/// is compared with the threshold. frame[m][k], noise_psd[m][k].
std::vector<BinLabel> speech_presence(
    std::span<const std::span<const Complex>> frame,
    std::span<const std::span<const double>> noise_psd,
    std::size_t num_head_channels, double threshold);

/// Oracle mode: passes externally supplied labels through.
inline std::vector<BinLabel> speech_presence_oracle(
    std::span<const BinLabel> labels) {
  return {labels.begin(), labels.end()};
}

/// Noise PSD tracker feeding speech_presence in estimated mode. Initialized
/// from the first frame, then smoothed recursively on noise-only bins.
class NoisePsdTracker {
 public:
  NoisePsdTracker(std::size_t num_channels, std::size_t num_bins,
                  double lambda);

  bool initialized() const { return initialized_; }
  std::span<const double> psd(std::size_t channel) const {
    return psd_[channel];
  }
  void observe(std::span<const std::span<const Complex>> frame,
               std::span<const BinLabel> labels);
  void initialize(std::span<const std::span<const Complex>> frame);

 private:
  double lambda_;
  bool initialized_ = false;
  std::vector<std::vector<double>> psd_;
};

/// Complex coherence phi(i,j) / sqrt(phi(i,i) phi(j,j)).
/// Throws kNumerical when either diagonal entry is not positive.
Complex pair_coherence(const CMatrix& phi, std::size_t i, std::size_t j);

using MicPair = std::pair<std::size_t, std::size_t>;

/// Mean of pair_coherence over the pair set.
Complex effective_coherence(const CMatrix& phi_y,
                            std::span<const MicPair> pairs);

struct CoherenceModel {
  double alpha = 0.5;
  double beta = 2.2;
  double distance = 0.18;  // meters
  double speed_of_sound = 343.0;

  void validate() const;
  /// Modified sinc coherence at angular frequency omega for this distance.
  double at_omega(double omega) const;
  /// Same law evaluated for an arbitrary microphone spacing.
  double at_omega(double omega, double distance_override) const;
};

/// Diffuse coherence model for STFT bin k.
double diffuse_coherence(const CoherenceModel& model, std::size_t bin,
                         const StftConfig& config);

/// Coherent-to-diffuse ratio from the noisy coherence and the real-valued
/// undesired coherence model. Returns +inf when |gamma_y| >= 1 - 1e-9 and
/// clamps negative values to zero. Throws kInvalidArgument when
/// |gamma_u| >= 1.
double cdr(Complex gamma_y, double gamma_u);

/// CDR result with the tally of bins dropped for undefined coherence.
struct BinSelection {
  std::vector<std::size_t> bins;
  std::size_t undefined = 0;
};

struct SubsetCriterion {
  double cdr_threshold_db = 0.0;  // may be -inf
  std::vector<MicPair> mic_pairs;

  void validate(std::size_t num_head_channels) const;
  /// Interaural cross pairs for M head channels, first half left.
  static std::vector<MicPair> interaural_pairs(std::size_t num_head_channels);
};

/// Estimated CDR in linear scale for one bin of the current state.
double bin_cdr(const CovarianceState& state, std::size_t bin,
               std::span<const MicPair> pairs, double gamma_u);

/// Bins whose estimated CDR in dB meets the threshold.
BinSelection select_bins(const CovarianceState& state,
                         const SubsetCriterion& criterion,
                         const CoherenceModel& model,
                         const StftConfig& config);

/// Membership test against a precomputed CDR (linear).
inline bool cdr_passes(double cdr_linear, double threshold_db) {
  if (threshold_db == -std::numeric_limits<double>::infinity()) return true;
  if (cdr_linear == std::numeric_limits<double>::infinity()) return true;
  if (cdr_linear <= 0.0) return false;
  return 10.0 * std::log10(cdr_linear) >= threshold_db;
}

}  // namespace bindoa
