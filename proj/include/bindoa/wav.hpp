#pragma once

#include <string>
#include <vector>

#include "bindoa/stft.hpp"

namespace bindoa {

struct WavData {
  double sample_rate = 0.0;
  MultichannelSignal channels;
};

enum class WavSampleFormat { kPcm16, kPcm24, kFloat32 };

/// Reads RIFF/WAVE files with 16/24/32-bit integer PCM or 32-bit float
/// samples (plain or WAVE_FORMAT_EXTENSIBLE). Samples are scaled to [-1, 1).
WavData read_wav(const std::string& path);

void write_wav(const std::string& path, const WavData& data,
               WavSampleFormat format = WavSampleFormat::kFloat32);

/// Reads several mono or multichannel files and stacks their channels in
/// order. All files must share sample rate and length.
WavData read_wav_set(const std::vector<std::string>& paths);

}  // namespace bindoa
