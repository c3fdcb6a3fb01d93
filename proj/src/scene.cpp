#include "bindoa/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "bindoa/fft.hpp"

namespace bindoa {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double pink_gain(double frequency) {
  constexpr double kCorner = 100.0;
  constexpr double kHighPass = 50.0;
  double gain = 1.0 / std::sqrt(std::max(frequency, kCorner));
  if (frequency < kHighPass) {
    const double r = frequency / kHighPass;
    gain *= r * r;
  }
  return gain;
}

double spectral_gain(NoiseSpectrum shape, double frequency) {
  return shape == NoiseSpectrum::kPink ? pink_gain(frequency) : 1.0;
}

// Time-domain variance produced by unit-variance complex Gaussian bins with
// the given per-bin gains, for an unnormalized inverse FFT of length n.
double synthesis_scale(std::span<const double> gains, std::size_t n) {
  double energy = 0.0;
  for (std::size_t k = 0; k < gains.size(); ++k) {
    const bool self_conjugate = k == 0 || (n % 2 == 0 && k == gains.size() - 1);
    energy += (self_conjugate ? 1.0 : 2.0) * gains[k] * gains[k];
  }
  return static_cast<double>(n) / std::sqrt(energy);
}

double distance(const Position& a, const Position& b) {
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d2);
}

}  // namespace

std::vector<Position> default_geometry(double external_distance) {
  return {
      {0.0075, 0.09, 0.0},   // left front (reference)
      {-0.0075, 0.09, 0.0},  // left rear
      {0.0075, -0.09, 0.0},  // right front
      {-0.0075, -0.09, 0.0},  // right rear
      {external_distance, 0.0, 0.0},
  };
}

std::vector<double> synth_speech_source(std::size_t num_samples,
                                        double sample_rate,
                                        std::uint64_t seed) {
  if (num_samples == 0) return {};
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Each syllable is its own noise burst colored by a pink tilt times a few
  // random formant-like bumps, so two talkers rarely share a bin for long.
  constexpr std::size_t kFormants = 3;
  constexpr double kFormantLow = 200.0;
  constexpr double kFormantHigh = 5000.0;
  constexpr double kFormantWidthOct = 0.3;
  constexpr double kFloor = 0.1;

  std::vector<double> out(num_samples, 0.0);
  std::size_t pos = 0;
  // Talk from the first sample and never pause twice in a row.
  bool paused = true;
  while (pos < num_samples) {
    const bool pause = !paused && uniform(rng) < 0.15;
    paused = pause;
    const double seconds = pause ? 0.1 + 0.2 * uniform(rng)
                                 : 0.12 + 0.2 * uniform(rng);
    const auto len = std::max<std::size_t>(
        2, static_cast<std::size_t>(seconds * sample_rate));
    if (pause) {
      pos += len;
      continue;
    }
    const double amplitude = 0.4 + 0.6 * uniform(rng);
    std::array<double, kFormants> centers{};
    for (double& c : centers) {
      c = kFormantLow * std::pow(kFormantHigh / kFormantLow, uniform(rng));
    }

    RealFft fft(len);
    std::vector<Complex> spectrum(fft.num_bins());
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      const double f =
          static_cast<double>(k) * sample_rate / static_cast<double>(len);
      double shape = kFloor;
      for (const double c : centers) {
        const double octaves = std::log2(std::max(f, 1.0) / c) / kFormantWidthOct;
        shape += std::exp(-0.5 * octaves * octaves);
      }
      spectrum[k] = pink_gain(f) * shape * Complex(normal(rng), normal(rng));
    }
    spectrum[0] = Complex(spectrum[0].real(), 0.0);
    if (len % 2 == 0) spectrum.back() = Complex(spectrum.back().real(), 0.0);
    std::vector<double> burst(len);
    fft.inverse(spectrum, burst);

    double energy = 0.0;
    for (const double v : burst) energy += v * v;
    const double norm =
        energy > 0.0 ? amplitude / std::sqrt(energy / static_cast<double>(len))
                     : 0.0;
    for (std::size_t n = 0; n < len && pos + n < num_samples; ++n) {
      const double w = std::sin(kPi * static_cast<double>(n) /
                                static_cast<double>(len));
      out[pos + n] = norm * burst[n] * w * w;
    }
    pos += len;
  }

  double energy = 0.0;
  for (const double v : out) energy += v * v;
  if (energy > 0.0) {
    const double scale = 1.0 / std::sqrt(energy / static_cast<double>(num_samples));
    for (double& v : out) v *= scale;
  }
  return out;
}

MultichannelSignal render_speaker(std::span<const double> source,
                                  double azimuth_deg,
                                  const std::vector<Position>& geometry,
                                  double speed_of_sound, double sample_rate) {
  if (geometry.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "geometry has no microphones");
  }
  MultichannelSignal out(geometry.size(),
                         std::vector<double>(source.size(), 0.0));
  if (source.empty()) return out;

  std::vector<double> delays(geometry.size());
  double max_delay = 0.0;
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    delays[m] = far_field_delay(geometry[m], azimuth_deg, speed_of_sound);
    max_delay = std::max(max_delay, std::abs(delays[m]));
  }
  const auto pad =
      static_cast<std::size_t>(std::ceil(max_delay * sample_rate)) + 64;
  std::size_t n = source.size() + 2 * pad;
  n += n % 2;

  RealFft fft(n);
  std::vector<double> buffer(n, 0.0);
  std::copy(source.begin(), source.end(), buffer.begin() + pad);
  std::vector<Complex> spectrum(fft.num_bins());
  fft.forward(buffer, spectrum);

  std::vector<Complex> shifted(spectrum.size());
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      const double omega = 2.0 * kPi * static_cast<double>(k) * sample_rate /
                           static_cast<double>(n);
      shifted[k] = spectrum[k] * std::polar(1.0, -omega * delays[m]);
    }
    // Nyquist must stay real for a real output; keep its cosine part.
    shifted.back() = Complex(shifted.back().real(), 0.0);
    fft.inverse(shifted, buffer);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t t = 0; t < source.size(); ++t) {
      out[m][t] = buffer[pad + t] * inv_n;
    }
  }
  return out;
}

MultichannelSignal render_diffuse_noise(const std::vector<Position>& geometry,
                                        const CoherenceModel& model,
                                        double duration_seconds,
                                        double sample_rate, std::uint64_t seed,
                                        NoiseSpectrum shape,
                                        DiffuseNoiseInfo* info) {
  model.validate();
  if (geometry.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "geometry has no microphones");
  }
  if (!(duration_seconds >= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "diffuse noise needs a duration of at least 1 s");
  }
  const auto num_samples =
      static_cast<std::size_t>(std::llround(duration_seconds * sample_rate));
  const std::size_t channels = geometry.size();
  const auto nc = static_cast<Eigen::Index>(channels);

  RealFft fft(num_samples);
  const std::size_t bins = fft.num_bins();
  std::vector<double> gains(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    gains[k] = spectral_gain(shape, static_cast<double>(k) * sample_rate /
                                        static_cast<double>(num_samples));
  }
  const double scale = synthesis_scale(gains, num_samples);

  Eigen::MatrixXd spacing(nc, nc);
  for (Eigen::Index i = 0; i < nc; ++i) {
    for (Eigen::Index j = 0; j < nc; ++j) {
      spacing(i, j) = distance(geometry[static_cast<std::size_t>(i)],
                               geometry[static_cast<std::size_t>(j)]);
    }
  }

  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<Complex>> spectra(channels,
                                            std::vector<Complex>(bins));
  Eigen::MatrixXd coherence(nc, nc);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  CVector z(nc);
  std::size_t clipped = 0;

  for (std::size_t k = 0; k < bins; ++k) {
    const double omega = 2.0 * kPi * static_cast<double>(k) * sample_rate /
                         static_cast<double>(num_samples);
    for (Eigen::Index i = 0; i < nc; ++i) {
      coherence(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < nc; ++j) {
        const double c = model.at_omega(omega, spacing(i, j));
        coherence(i, j) = c;
        coherence(j, i) = c;
      }
    }
    solver.compute(coherence);
    Eigen::VectorXd values = solver.eigenvalues();
    if (values.minCoeff() < -1e-12) ++clipped;
    values = values.cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd mixing =
        solver.eigenvectors() * values.asDiagonal();

    const bool self_conjugate = k == 0 || (num_samples % 2 == 0 && k == bins - 1);
    for (Eigen::Index i = 0; i < nc; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      z(i) = self_conjugate ? Complex(re, 0.0)
                            : Complex(re, im) / std::sqrt(2.0);
    }
    const CVector mixed = mixing.cast<Complex>() * z;
    for (std::size_t m = 0; m < channels; ++m) {
      spectra[m][k] = mixed(static_cast<Eigen::Index>(m)) * gains[k] * scale;
    }
  }
  if (info != nullptr) info->clipped_frequencies = clipped;

  MultichannelSignal out(channels, std::vector<double>(num_samples));
  const double inv_n = 1.0 / static_cast<double>(num_samples);
  for (std::size_t m = 0; m < channels; ++m) {
    fft.inverse(spectra[m], out[m]);
    for (double& v : out[m]) v *= inv_n;
  }
  return out;
}

std::vector<BinLabel> OracleLabels::presence(std::size_t frame) const {
  std::vector<BinLabel> out(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    out[k] = at(k, frame) == kNoiseOnlyLabel ? BinLabel::kNoiseOnly
                                             : BinLabel::kSpeechAndNoise;
  }
  return out;
}

OracleLabels compute_oracle_labels(std::span<const MultichannelSignal> speech,
                                   const MultichannelSignal& noise,
                                   std::size_t num_head_channels,
                                   const StftConfig& config) {
  const auto head_only = [&](const MultichannelSignal& s) {
    if (s.size() < num_head_channels) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "signal has fewer channels than head microphones");
    }
    return MultichannelSignal(s.begin(),
                              s.begin() + static_cast<std::ptrdiff_t>(
                                              num_head_channels));
  };
  const auto power = [&](const MultichannelSignal& s) {
    const Spectrogram spec = analyze(head_only(s), config);
    std::vector<double> p(spec.num_frames() * spec.num_bins(), 0.0);
    for (std::size_t m = 0; m < spec.num_channels(); ++m) {
      for (std::size_t l = 0; l < spec.num_frames(); ++l) {
        const auto frame = spec.frame(m, l);
        for (std::size_t k = 0; k < frame.size(); ++k) {
          p[l * spec.num_bins() + k] += std::norm(frame[k]);
        }
      }
    }
    return p;
  };

  OracleLabels out;
  out.bins = config.num_bins();
  const std::vector<double> noise_power = power(noise);
  out.frames = noise_power.size() / out.bins;
  std::vector<std::vector<double>> speaker_power;
  for (const auto& s : speech) speaker_power.push_back(power(s));

  out.labels.assign(noise_power.size(), kNoiseOnlyLabel);
  for (std::size_t idx = 0; idx < noise_power.size(); ++idx) {
    double total = noise_power[idx];
    for (const auto& p : speaker_power) total += p[idx];
    for (std::size_t j = 0; j < speaker_power.size(); ++j) {
      const double pj = speaker_power[j][idx];
      if (pj > total - pj) {
        out.labels[idx] = static_cast<int>(j);
        break;
      }
    }
  }
  return out;
}

double head_power(const MultichannelSignal& signal,
                  std::size_t num_head_channels) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t m = 0; m < num_head_channels && m < signal.size(); ++m) {
    for (const double v : signal[m]) sum += v * v;
    count += signal[m].size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

SceneRender mix_at_snr(std::vector<MultichannelSignal> speech,
                       MultichannelSignal noise, double snr_db,
                       std::size_t num_head_channels,
                       const StftConfig& config) {
  if (speech.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no speech components");
  }
  if (!std::isfinite(snr_db)) {
    throw Error(ErrorCode::kInvalidArgument, "SNR must be finite");
  }
  const std::size_t channels = noise.size();
  const std::size_t samples = channels == 0 ? 0 : noise.front().size();
  MultichannelSignal total(channels, std::vector<double>(samples, 0.0));
  for (const auto& s : speech) {
    if (s.size() != channels) {
      throw Error(ErrorCode::kDimensionMismatch, "speech channel mismatch");
    }
    for (std::size_t m = 0; m < channels; ++m) {
      if (s[m].size() != samples) {
        throw Error(ErrorCode::kDimensionMismatch, "speech length mismatch");
      }
      for (std::size_t t = 0; t < samples; ++t) total[m][t] += s[m][t];
    }
  }
  const double speech_power = head_power(total, num_head_channels);
  const double noise_power = head_power(noise, num_head_channels);
  if (!(speech_power > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "speech has zero power");
  }
  if (!(noise_power > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise has zero power");
  }
  const double gain =
      std::sqrt(speech_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
  for (auto& channel : noise) {
    for (double& v : channel) v *= gain;
  }
  for (std::size_t m = 0; m < channels; ++m) {
    for (std::size_t t = 0; t < samples; ++t) total[m][t] += noise[m][t];
  }

  SceneRender render;
  render.oracle_labels =
      compute_oracle_labels(speech, noise, num_head_channels, config);
  render.mixture = std::move(total);
  render.speech = std::move(speech);
  render.noise = std::move(noise);
  render.noise_gain = gain;
  return render;
}

void SceneSpec::validate() const {
  if (geometry.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "scene needs at least two head microphones and an external "
                "microphone");
  }
  if (azimuths.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scene has no speakers");
  }
  for (std::size_t a = 0; a < azimuths.size(); ++a) {
    for (std::size_t b = a + 1; b < azimuths.size(); ++b) {
      if (circular_distance_deg(azimuths[a], azimuths[b]) < 1e-9) {
        throw Error(ErrorCode::kInvalidArgument, "collocated speakers");
      }
    }
  }
  if (!sources.empty() && sources.size() != azimuths.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "need one source signal per speaker");
  }
  if (!std::isfinite(snr_db)) {
    throw Error(ErrorCode::kInvalidArgument, "SNR must be finite");
  }
  if (!(duration > 0.0) || !(sample_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "duration and sample rate must be positive");
  }
}

SceneRender render_scene(const SceneSpec& spec, const StftConfig& config) {
  spec.validate();
  if (config.sample_rate != spec.sample_rate) {
    throw Error(ErrorCode::kInvalidArgument,
                "scene and STFT sample rates differ");
  }
  const auto samples =
      static_cast<std::size_t>(std::llround(spec.duration * spec.sample_rate));
  const std::size_t head = spec.num_head_channels();

  std::vector<MultichannelSignal> images;
  for (std::size_t j = 0; j < spec.azimuths.size(); ++j) {
    std::vector<double> source;
    if (spec.sources.empty()) {
      source = synth_speech_source(samples, spec.sample_rate,
                                   mix_seed(spec.seed, 100 + j));
    } else {
      source = spec.sources[j];
      source.resize(samples, 0.0);
    }
    images.push_back(render_speaker(source, spec.azimuths[j], spec.geometry,
                                    spec.noise_model.speed_of_sound,
                                    spec.sample_rate));
  }

  SceneRender render;
  if (spec.noise == NoiseKind::kDiffuse) {
    MultichannelSignal noise = render_diffuse_noise(
        spec.geometry, spec.noise_model, spec.duration, spec.sample_rate,
        mix_seed(spec.seed, 200), spec.noise_spectrum);
    for (auto& channel : noise) channel.resize(samples, 0.0);
    render = mix_at_snr(std::move(images), std::move(noise), spec.snr_db, head,
                        config);
  } else {
    MultichannelSignal silence(spec.geometry.size(),
                               std::vector<double>(samples, 0.0));
    render.oracle_labels =
        compute_oracle_labels(images, silence, head, config);
    render.mixture = silence;
    for (const auto& image : images) {
      for (std::size_t m = 0; m < image.size(); ++m) {
        for (std::size_t t = 0; t < samples; ++t) {
          render.mixture[m][t] += image[m][t];
        }
      }
    }
    render.speech = std::move(images);
    render.noise = std::move(silence);
    render.noise_gain = 0.0;
  }
  render.azimuths = spec.azimuths;
  return render;
}

}  // namespace bindoa
