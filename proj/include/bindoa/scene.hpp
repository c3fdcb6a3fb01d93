#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bindoa/common.hpp"
#include "bindoa/doa.hpp"
#include "bindoa/spatial_stats.hpp"
#include "bindoa/stft.hpp"

namespace bindoa {

/// Binaural M=4 layout (1.5 cm front/back spacing per device, 0.18 m
/// between devices, left device on +y) followed by the external microphone
/// `external_distance` meters in front of the array center.
std::vector<Position> default_geometry(double external_distance = 1.0);

/// Speech-shaped test signal: a sequence of Hann-gated Gaussian noise
/// syllables (about 4 per second) with occasional single pauses, starting
/// with a syllable. Each syllable has a pink tilt with three random
/// formant-like peaks. Unit RMS.
std::vector<double> synth_speech_source(std::size_t num_samples,
                                        double sample_rate,
                                        std::uint64_t seed);

/// Far-field direct-path image of a mono source on every microphone,
/// delayed by band-limited (frequency-domain) fractional delays.
MultichannelSignal render_speaker(std::span<const double> source,
                                  double azimuth_deg,
                                  const std::vector<Position>& geometry,
                                  double speed_of_sound, double sample_rate);

enum class NoiseSpectrum { kWhite, kPink };

struct DiffuseNoiseInfo {
  /// Frequencies at which the model coherence matrix had negative
  /// eigenvalues clipped to zero.
  std::size_t clipped_frequencies = 0;
};

/// Gaussian noise whose pairwise coherence follows `model` evaluated at
/// each microphone spacing. Per-channel variance is 1.
MultichannelSignal render_diffuse_noise(const std::vector<Position>& geometry,
                                        const CoherenceModel& model,
                                        double duration_seconds,
                                        double sample_rate, std::uint64_t seed,
                                        NoiseSpectrum shape = NoiseSpectrum::kWhite,
                                        DiffuseNoiseInfo* info = nullptr);

inline constexpr int kNoiseOnlyLabel = -1;

/// Per (bin, frame) index of the dominant speaker, or kNoiseOnlyLabel.
/// Stored frame-major: labels[frame * bins + bin].
struct OracleLabels {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<int> labels;

  int at(std::size_t bin, std::size_t frame) const {
    return labels[frame * bins + bin];
  }
  /// Speech presence view of one frame.
  std::vector<BinLabel> presence(std::size_t frame) const;
};

struct SceneRender {
  MultichannelSignal mixture;
  std::vector<MultichannelSignal> speech;
  MultichannelSignal noise;
  OracleLabels oracle_labels;
  std::vector<double> azimuths;
  double noise_gain = 1.0;
};

/// Dominant speaker per bin from head-summed direct-path power: a speaker
/// is dominant when its power exceeds all other speakers plus noise.
OracleLabels compute_oracle_labels(
    std::span<const MultichannelSignal> speech, const MultichannelSignal& noise,
    std::size_t num_head_channels, const StftConfig& config);

/// Head-averaged power of a multichannel signal (mean square over the
/// first `num_head_channels` channels and all samples).
double head_power(const MultichannelSignal& signal,
                  std::size_t num_head_channels);

/// Scales noise to the requested broadband SNR over the head channels and
/// adds it to the summed speech. Throws on silent speech or noise.
SceneRender mix_at_snr(std::vector<MultichannelSignal> speech,
                       MultichannelSignal noise, double snr_db,
                       std::size_t num_head_channels,
                       const StftConfig& config);

enum class NoiseKind { kDiffuse, kNone };

struct SceneSpec {
  std::vector<Position> geometry = default_geometry();
  std::vector<double> azimuths;
  /// Optional per-speaker mono sources; synthesized from the seed when
  /// empty.
  std::vector<std::vector<double>> sources;
  NoiseKind noise = NoiseKind::kDiffuse;
  NoiseSpectrum noise_spectrum = NoiseSpectrum::kPink;
  CoherenceModel noise_model;
  double snr_db = 0.0;
  double duration = 5.0;
  double sample_rate = 16000.0;
  std::uint64_t seed = 1;

  std::size_t num_head_channels() const { return geometry.size() - 1; }
  void validate() const;
};

/// Deterministic given the spec (including its seed).
SceneRender render_scene(const SceneSpec& spec, const StftConfig& config);

}  // namespace bindoa
