#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bindoa/common.hpp"

namespace bindoa {

enum class WindowKind { kSqrtHann };

struct StftConfig {
  double sample_rate = 16000.0;
  std::size_t window_len = 512;
  std::size_t hop = 256;
  WindowKind window_kind = WindowKind::kSqrtHann;

  /// 32 ms sqrt-Hann with 50% overlap at the given rate.
  static StftConfig for_rate(double sample_rate, double window_seconds = 0.032);

  std::size_t num_bins() const { return window_len / 2 + 1; }
  double bin_frequency(std::size_t bin) const {
    return static_cast<double>(bin) * sample_rate /
           static_cast<double>(window_len);
  }
  double hop_seconds() const {
    return static_cast<double>(hop) / sample_rate;
  }

  /// Throws kInvalidArgument when the invariants do not hold.
  void validate() const;
};

/// Periodic sqrt-Hann window; satisfies w[n]^2 + w[n + N/2]^2 = 1.
std::vector<double> analysis_window(const StftConfig& config);

/// Complex STFT coefficients stored channel-major, then frame, then bin.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(StftConfig config, std::size_t channels, std::size_t frames);

  const StftConfig& config() const { return config_; }
  std::size_t num_channels() const { return channels_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }

  Complex& at(std::size_t channel, std::size_t bin, std::size_t frame) {
    return data_[index(channel, bin, frame)];
  }
  const Complex& at(std::size_t channel, std::size_t bin,
                    std::size_t frame) const {
    return data_[index(channel, bin, frame)];
  }

  /// Contiguous bins of one channel at one frame.
  std::span<Complex> frame(std::size_t channel, std::size_t frame) {
    return {data_.data() + index(channel, 0, frame), bins_};
  }
  std::span<const Complex> frame(std::size_t channel, std::size_t frame) const {
    return {data_.data() + index(channel, 0, frame), bins_};
  }

  /// Snapshot vector across channels for one time-frequency bin.
  CVector snapshot(std::size_t bin, std::size_t frame) const;

 private:
  std::size_t index(std::size_t channel, std::size_t bin,
                    std::size_t frame) const {
    return (channel * frames_ + frame) * bins_ + bin;
  }

  StftConfig config_;
  std::size_t channels_ = 0;
  std::size_t bins_ = 0;
  std::size_t frames_ = 0;
  std::vector<Complex> data_;
};

using MultichannelSignal = std::vector<std::vector<double>>;

/// Number of frames analyze() produces for a signal of the given length.
std::size_t num_frames_for(std::size_t num_samples, const StftConfig& config);

/// One-sided windowed DFT of every hop-spaced frame, no pre-padding.
/// FFT length equals the window length.
Spectrogram analyze(const MultichannelSignal& signal, const StftConfig& config);

}  // namespace bindoa
