#include "bindoa/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bindoa {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::kIo, path + ": " + why);
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const std::vector<unsigned char> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(path, "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) fail(path, "short fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (available < 26) fail(path, "short extensible fmt chunk");
        format = read_u16(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = available;
    }
    pos = body + size + (size % 2);
  }
  if (channels == 0 || data == nullptr) fail(path, "missing fmt or data chunk");

  const bool supported = (format == kFormatPcm &&
                          (bits == 16 || bits == 24 || bits == 32)) ||
                         (format == kFormatFloat && bits == 32);
  if (!supported) {
    fail(path, "unsupported sample format (" + std::to_string(format) + ", " +
                   std::to_string(bits) + " bit)");
  }

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  WavData out;
  out.sample_rate = rate;
  out.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (t * channels + c) * width;
      double v = 0.0;
      if (format == kFormatFloat) {
        const std::uint32_t raw = read_u32(p);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t raw = p[0] | (p[1] << 8) | (p[2] << 16);
        if (raw & 0x800000) raw -= 0x1000000;
        v = raw / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
      }
      out.channels[c][t] = v;
    }
  }
  return out;
}

void write_wav(const std::string& path, const WavData& data,
               WavSampleFormat format) {
  if (data.channels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no channels to write");
  }
  const std::size_t frames = data.channels.front().size();
  for (const auto& c : data.channels) {
    if (c.size() != frames) {
      throw Error(ErrorCode::kDimensionMismatch, "channel lengths differ");
    }
  }
  const std::uint16_t channels = static_cast<std::uint16_t>(data.channels.size());
  const std::uint16_t bits = format == WavSampleFormat::kPcm16   ? 16
                             : format == WavSampleFormat::kPcm24 ? 24
                                                                 : 32;
  const std::uint32_t width = bits / 8;
  const auto rate = static_cast<std::uint32_t>(std::lround(data.sample_rate));
  const auto data_size = static_cast<std::uint32_t>(frames * channels * width);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, format == WavSampleFormat::kFloat32 ? kFormatFloat : kFormatPcm);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * width);
  put_u16(out, static_cast<std::uint16_t>(channels * width));
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);

  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = data.channels[c][t];
      if (format == WavSampleFormat::kFloat32) {
        const float f = static_cast<float>(v);
        std::uint32_t raw;
        std::memcpy(&raw, &f, sizeof raw);
        put_u32(out, raw);
      } else if (format == WavSampleFormat::kPcm16) {
        const auto q = static_cast<std::int32_t>(
            std::clamp(std::lround(v * 32768.0), -32768L, 32767L));
        put_u16(out, static_cast<std::uint16_t>(q));
      } else {
        const auto q = static_cast<std::int32_t>(
            std::clamp(std::lround(v * 8388608.0), -8388608L, 8388607L));
        const auto u = static_cast<std::uint32_t>(q);
        out.push_back(u & 0xFF);
        out.push_back((u >> 8) & 0xFF);
        out.push_back((u >> 16) & 0xFF);
      }
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + path);
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorCode::kIo, "short write to " + path);
}

WavData read_wav_set(const std::vector<std::string>& paths) {
  WavData out;
  for (const auto& path : paths) {
    WavData part = read_wav(path);
    if (out.channels.empty()) {
      out.sample_rate = part.sample_rate;
    } else if (part.sample_rate != out.sample_rate ||
               part.channels.front().size() != out.channels.front().size()) {
      throw Error(ErrorCode::kIo,
                  path + ": sample rate or length differs from first file");
    }
    for (auto& c : part.channels) out.channels.push_back(std::move(c));
  }
  if (out.channels.empty()) throw Error(ErrorCode::kIo, "no WAV files given");
  return out;
}

}  // namespace bindoa
