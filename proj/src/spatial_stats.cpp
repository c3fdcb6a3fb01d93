#include "bindoa/spatial_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bindoa {

namespace {

constexpr double kCoherentEdge = 1e-9;

void check_frame(std::span<const std::span<const Complex>> frame,
                 std::size_t channels, std::size_t bins) {
  if (frame.size() != channels) {
    throw Error(ErrorCode::kDimensionMismatch,
                "frame has " + std::to_string(frame.size()) +
                    " channels, expected " + std::to_string(channels));
  }
  for (const auto& channel : frame) {
    if (channel.size() != bins) {
      throw Error(ErrorCode::kDimensionMismatch, "frame bin count mismatch");
    }
  }
}

}  // namespace

double smoothing_factor(double hop_seconds, double tau_seconds) {
  if (!(hop_seconds > 0.0) || !(tau_seconds > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "hop and time constant must be positive");
  }
  return std::exp(-hop_seconds / tau_seconds);
}

CovarianceState::CovarianceState(std::size_t num_bins,
                                 std::size_t num_channels, double lambda_y,
                                 double lambda_u, double epsilon)
    : channels_(num_channels),
      lambda_y_(lambda_y),
      lambda_u_(lambda_u),
      seen_y_(num_bins, 0),
      seen_u_(num_bins, 0) {
  if (num_channels < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least two channels");
  }
  auto in_unit = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!in_unit(lambda_y) || !in_unit(lambda_u)) {
    throw Error(ErrorCode::kInvalidArgument,
                "smoothing factors must lie in [0, 1)");
  }
  if (!(epsilon >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "negative initial loading");
  }
  const auto n = static_cast<Eigen::Index>(num_channels);
  const CMatrix init = CMatrix::Identity(n, n) * epsilon;
  phi_y_.assign(num_bins, init);
  phi_u_.assign(num_bins, init);
}

void CovarianceState::update_bin(std::size_t bin,
                                 std::span<const Complex> snapshot,
                                 BinLabel label) {
  if (snapshot.size() != channels_) {
    throw Error(ErrorCode::kDimensionMismatch, "snapshot channel mismatch");
  }
  const bool speech = label == BinLabel::kSpeechAndNoise;
  CMatrix& phi = speech ? phi_y_[bin] : phi_u_[bin];
  const double lambda = speech ? lambda_y_ : lambda_u_;
  const double gain = 1.0 - lambda;
  const auto n = static_cast<Eigen::Index>(channels_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex yi = snapshot[static_cast<std::size_t>(i)];
    phi(i, i) = Complex(lambda * phi(i, i).real() + gain * std::norm(yi), 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Complex v =
          lambda * phi(i, j) +
          gain * yi * std::conj(snapshot[static_cast<std::size_t>(j)]);
      phi(i, j) = v;
      phi(j, i) = std::conj(v);
    }
  }
  ++(speech ? seen_y_[bin] : seen_u_[bin]);
}

void update_covariance(CovarianceState& state,
                       std::span<const std::span<const Complex>> frame,
                       std::span<const BinLabel> labels) {
  const std::size_t bins = state.num_bins();
  check_frame(frame, state.num_channels(), bins);
  if (labels.size() != bins) {
    throw Error(ErrorCode::kDimensionMismatch, "label count mismatch");
  }
  std::vector<Complex> snapshot(state.num_channels());
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t m = 0; m < snapshot.size(); ++m) {
      snapshot[m] = frame[m][k];
    }
    state.update_bin(k, snapshot, labels[k]);
  }
}

std::vector<BinLabel> speech_presence(
    std::span<const std::span<const Complex>> frame,
    std::span<const std::span<const double>> noise_psd,
    std::size_t num_head_channels, double threshold) {
  if (num_head_channels == 0 || num_head_channels > frame.size() ||
      noise_psd.size() < num_head_channels) {
    throw Error(ErrorCode::kDimensionMismatch, "head channel count mismatch");
  }
  const std::size_t bins = frame.front().size();
  std::vector<BinLabel> labels(bins, BinLabel::kNoiseOnly);
  for (std::size_t k = 0; k < bins; ++k) {
    double score = 0.0;
    for (std::size_t m = 0; m < num_head_channels; ++m) {
      const double psd = noise_psd[m][k];
      if (!(psd > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "noise PSD must be positive");
      }
      const double snr = std::norm(frame[m][k]) / psd;
      score += 1.0 - std::exp(-std::max(snr - 1.0, 0.0));
    }
    score /= static_cast<double>(num_head_channels);
    if (score > threshold) labels[k] = BinLabel::kSpeechAndNoise;
  }
  return labels;
}

NoisePsdTracker::NoisePsdTracker(std::size_t num_channels,
                                 std::size_t num_bins, double lambda)
    : lambda_(lambda), psd_(num_channels, std::vector<double>(num_bins, 0.0)) {}

void NoisePsdTracker::initialize(
    std::span<const std::span<const Complex>> frame) {
  check_frame(frame, psd_.size(), psd_.front().size());
  double floor = 0.0;
  for (std::size_t m = 0; m < psd_.size(); ++m) {
    for (std::size_t k = 0; k < psd_[m].size(); ++k) {
      psd_[m][k] = std::norm(frame[m][k]);
      floor = std::max(floor, psd_[m][k]);
    }
  }
  // Keep every entry strictly positive so the presence score is defined.
  floor = std::max(floor * 1e-10, std::numeric_limits<double>::min());
  for (auto& channel : psd_) {
    for (double& v : channel) v = std::max(v, floor);
  }
  initialized_ = true;
}

void NoisePsdTracker::observe(std::span<const std::span<const Complex>> frame,
                              std::span<const BinLabel> labels) {
  check_frame(frame, psd_.size(), psd_.front().size());
  for (std::size_t m = 0; m < psd_.size(); ++m) {
    for (std::size_t k = 0; k < psd_[m].size(); ++k) {
      if (labels[k] != BinLabel::kNoiseOnly) continue;
      const double updated =
          lambda_ * psd_[m][k] + (1.0 - lambda_) * std::norm(frame[m][k]);
      if (updated > 0.0) psd_[m][k] = updated;
    }
  }
}

Complex pair_coherence(const CMatrix& phi, std::size_t i, std::size_t j) {
  const auto n = static_cast<std::size_t>(phi.rows());
  if (i >= n || j >= n) {
    throw Error(ErrorCode::kDimensionMismatch, "channel index out of range");
  }
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  const double pii = phi(ii, ii).real();
  const double pjj = phi(jj, jj).real();
  if (!(pii > 0.0) || !(pjj > 0.0)) {
    throw Error(ErrorCode::kNumerical,
                "coherence undefined for zero-power channel");
  }
  if (i == j) return {1.0, 0.0};
  return phi(ii, jj) / std::sqrt(pii * pjj);
}

Complex effective_coherence(const CMatrix& phi_y,
                            std::span<const MicPair> pairs) {
  if (pairs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "microphone pair set is empty");
  }
  Complex sum{0.0, 0.0};
  for (const auto& [i, j] : pairs) sum += pair_coherence(phi_y, i, j);
  return sum / static_cast<double>(pairs.size());
}

void CoherenceModel::validate() const {
  if (!(distance > 0.0) || !(speed_of_sound > 0.0) || !(alpha > 0.0) ||
      !(beta >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "coherence model needs r > 0, c > 0, alpha > 0, beta >= 0");
  }
}

double CoherenceModel::at_omega(double omega) const {
  return at_omega(omega, distance);
}

double CoherenceModel::at_omega(double omega, double distance_override) const {
  const double x = omega * distance_override / speed_of_sound;
  const double a = alpha * x;
  const double sinc = a == 0.0 ? 1.0 : std::sin(a) / a;
  const double b = beta * x;
  return sinc / std::sqrt(1.0 + b * b * b * b);
}

double diffuse_coherence(const CoherenceModel& model, std::size_t bin,
                         const StftConfig& config) {
  return model.at_omega(2.0 * kPi * config.bin_frequency(bin));
}

double cdr(Complex gamma_y, double gamma_u) {
  if (!(std::abs(gamma_u) < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "undesired coherence model must satisfy |gamma_u| < 1");
  }
  const double mag2 = std::norm(gamma_y);
  if (std::sqrt(mag2) >= 1.0 - kCoherentEdge) {
    return std::numeric_limits<double>::infinity();
  }
  const double re = gamma_y.real();
  const double gu2 = gamma_u * gamma_u;
  const double radicand =
      gu2 * re * re - gu2 * mag2 + gu2 - 2.0 * gamma_u * re + mag2;
  const double numerator =
      gamma_u * re - mag2 - std::sqrt(std::max(radicand, 0.0));
  const double value = numerator / (mag2 - 1.0);
  return value > 0.0 ? value : 0.0;
}

void SubsetCriterion::validate(std::size_t num_head_channels) const {
  if (mic_pairs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "microphone pair set is empty");
  }
  const std::size_t half = num_head_channels / 2;
  for (const auto& [i, j] : mic_pairs) {
    if (i == j || i >= half || j < half || j >= num_head_channels) {
      throw Error(ErrorCode::kInvalidArgument,
                  "microphone pairs must join a left and a right device "
                  "channel");
    }
  }
  if (std::isnan(cdr_threshold_db)) {
    throw Error(ErrorCode::kInvalidArgument, "CDR threshold is NaN");
  }
}

std::vector<MicPair> SubsetCriterion::interaural_pairs(
    std::size_t num_head_channels) {
  const std::size_t half = num_head_channels / 2;
  std::vector<MicPair> pairs;
  for (std::size_t i = 0; i < half; ++i) {
    for (std::size_t j = half; j < num_head_channels; ++j) {
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

double bin_cdr(const CovarianceState& state, std::size_t bin,
               std::span<const MicPair> pairs, double gamma_u) {
  return cdr(effective_coherence(state.phi_y(bin), pairs), gamma_u);
}

BinSelection select_bins(const CovarianceState& state,
                         const SubsetCriterion& criterion,
                         const CoherenceModel& model,
                         const StftConfig& config) {
  BinSelection selection;
  const bool take_all = criterion.cdr_threshold_db ==
                        -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < state.num_bins(); ++k) {
    if (take_all) {
      selection.bins.push_back(k);
      continue;
    }
    const double gamma_u = diffuse_coherence(model, k, config);
    if (!(std::abs(gamma_u) < 1.0)) {
      // DC: the model is fully coherent and the CDR is not identifiable.
      ++selection.undefined;
      continue;
    }
    double value = 0.0;
    try {
      value = bin_cdr(state, k, criterion.mic_pairs, gamma_u);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumerical) throw;
      ++selection.undefined;
      continue;
    }
    if (cdr_passes(value, criterion.cdr_threshold_db)) {
      selection.bins.push_back(k);
    }
  }
  return selection;
}

}  // namespace bindoa
