#include "bindoa/stft.hpp"

#include <cmath>
#include <string>

#include "bindoa/fft.hpp"

namespace bindoa {

StftConfig StftConfig::for_rate(double sample_rate, double window_seconds) {
  StftConfig config;
  config.sample_rate = sample_rate;
  auto len = static_cast<std::size_t>(std::lround(sample_rate * window_seconds));
  len += len % 2;
  config.window_len = len;
  config.hop = len / 2;
  return config;
}

void StftConfig::validate() const {
  if (!(sample_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sample rate must be positive");
  }
  if (window_len < 2 || window_len % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "window length must be even and at least 2, got " +
                    std::to_string(window_len));
  }
  if (hop != window_len / 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "hop must be half the window length");
  }
}

std::vector<double> analysis_window(const StftConfig& config) {
  std::vector<double> window(config.window_len);
  const double n = static_cast<double>(config.window_len);
  for (std::size_t i = 0; i < window.size(); ++i) {
    window[i] = std::sin(kPi * static_cast<double>(i) / n);
  }
  return window;
}

Spectrogram::Spectrogram(StftConfig config, std::size_t channels,
                         std::size_t frames)
    : config_(config),
      channels_(channels),
      bins_(config.num_bins()),
      frames_(frames),
      data_(channels * frames * bins_) {}

CVector Spectrogram::snapshot(std::size_t bin, std::size_t frame) const {
  CVector y(static_cast<Eigen::Index>(channels_));
  for (std::size_t m = 0; m < channels_; ++m) {
    y(static_cast<Eigen::Index>(m)) = at(m, bin, frame);
  }
  return y;
}

std::size_t num_frames_for(std::size_t num_samples, const StftConfig& config) {
  if (num_samples < config.window_len) return 0;
  return (num_samples - config.window_len) / config.hop + 1;
}

Spectrogram analyze(const MultichannelSignal& signal,
                    const StftConfig& config) {
  config.validate();
  if (signal.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "signal has no channels");
  }
  const std::size_t num_samples = signal.front().size();
  for (const auto& channel : signal) {
    if (channel.size() != num_samples) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "channel lengths differ");
    }
  }
  if (num_samples < config.window_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "signal shorter than one analysis window");
  }

  const std::size_t frames = num_frames_for(num_samples, config);
  Spectrogram spec(config, signal.size(), frames);
  const auto window = analysis_window(config);
  RealFft fft(config.window_len);
  std::vector<double> buffer(config.window_len);

  for (std::size_t m = 0; m < signal.size(); ++m) {
    for (std::size_t l = 0; l < frames; ++l) {
      const double* src = signal[m].data() + l * config.hop;
      for (std::size_t n = 0; n < buffer.size(); ++n) {
        buffer[n] = src[n] * window[n];
      }
      fft.forward(buffer, spec.frame(m, l));
    }
  }
  return spec;
}

}  // namespace bindoa
