#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bindoa/stft.hpp"
#include "test_support.hpp"

namespace bindoa {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(StftConfig, DefaultParametersAt16k) {
  const StftConfig config = StftConfig::for_rate(16000.0);
  EXPECT_EQ(config.window_len, 512u);
  EXPECT_EQ(config.hop, 256u);
  EXPECT_EQ(config.num_bins(), 257u);
  EXPECT_DOUBLE_EQ(config.hop_seconds(), 0.016);
  EXPECT_DOUBLE_EQ(config.bin_frequency(256), 8000.0);
}

TEST(StftConfig, RejectsBadSettings) {
  StftConfig config;
  config.hop = 0;
  EXPECT_THROW(config.validate(), Error);
  config = StftConfig{};
  config.window_len = 511;
  EXPECT_THROW(config.validate(), Error);
  config = StftConfig{};
  config.sample_rate = 0.0;
  EXPECT_THROW(config.validate(), Error);
}

TEST(Window, SqrtHannSumsToOneAtHalfOverlap) {
  const StftConfig config;
  const auto w = analysis_window(config);
  ASSERT_EQ(w.size(), 512u);
  EXPECT_EQ(w[0], 0.0);
  for (std::size_t n = 0; n < 256; ++n) {
    EXPECT_NEAR(w[n] * w[n] + w[n + 256] * w[n + 256], 1.0, 1e-15);
  }
}

TEST(Analyze, FrameCountFormula) {
  const StftConfig config;
  EXPECT_EQ(num_frames_for(512, config), 1u);
  EXPECT_EQ(num_frames_for(767, config), 1u);
  EXPECT_EQ(num_frames_for(768, config), 2u);
  EXPECT_EQ(num_frames_for(16000, config), 61u);
}

TEST(Analyze, ZeroInputGivesZeroSpectrogram) {
  const StftConfig config;
  const MultichannelSignal x(2, std::vector<double>(16000, 0.0));
  const Spectrogram s = analyze(x, config);
  EXPECT_EQ(s.num_frames(), 61u);
  EXPECT_EQ(s.num_bins(), 257u);
  EXPECT_EQ(s.num_channels(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t l = 0; l < s.num_frames(); ++l) {
      for (const Complex& c : s.frame(m, l)) EXPECT_EQ(c, Complex(0.0));
    }
  }
}

TEST(Analyze, MatchesDirectWindowedDft) {
  const StftConfig config;
  testing::Rng rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> x(2000);
  for (double& v : x) v = normal(rng);
  const Spectrogram s = analyze({x}, config);
  const auto w = analysis_window(config);
  for (std::size_t l : {0u, 2u, 5u}) {
    for (std::size_t k : {0u, 1u, 37u, 128u, 256u}) {
      Complex ref(0.0);
      for (std::size_t n = 0; n < 512; ++n) {
        ref += w[n] * x[l * 256 + n] *
               std::polar(1.0, -2.0 * kPi * static_cast<double>(k * n) / 512.0);
      }
      EXPECT_NEAR(std::abs(s.at(0, k, l) - ref), 0.0, 1e-10);
    }
  }
}

// The sqrt-Hann (sine) window leaks 1 / (4 d^2 - 1) of the peak magnitude
// into the bin d away from a bin-centered tone: -30.9 dB at d = 3 and below
// -40 dB from d = 6 on.
TEST(Analyze, BinCenteredSinusoidLeakage) {
  const StftConfig config;
  const std::size_t k0 = 64;
  std::vector<double> x(4096);
  for (std::size_t n = 0; n < x.size(); ++n) {
    x[n] = std::cos(2.0 * kPi * static_cast<double>(k0 * n) / 512.0);
  }
  const Spectrogram s = analyze({x}, config);
  for (std::size_t l = 0; l < s.num_frames(); ++l) {
    const double peak = std::abs(s.at(0, k0, l));
    for (std::size_t k = 0; k < s.num_bins(); ++k) {
      const double d = std::abs(static_cast<double>(k) - static_cast<double>(k0));
      if (d < 3.0) continue;
      const double db = 20.0 * std::log10(std::abs(s.at(0, k, l)) / peak);
      if (d <= 10.0) {
        EXPECT_NEAR(db, -20.0 * std::log10(4.0 * d * d - 1.0), 0.1) << k;
      }
      if (d >= 6.0) EXPECT_LT(db, -40.0) << "bin " << k;
    }
  }
}

TEST(Analyze, SnapshotCollectsChannels) {
  const StftConfig config;
  MultichannelSignal x(3, std::vector<double>(1024));
  for (std::size_t m = 0; m < 3; ++m) x[m][100] = static_cast<double>(m + 1);
  const Spectrogram s = analyze(x, config);
  const CVector v = s.snapshot(10, 0);
  ASSERT_EQ(v.size(), 3);
  for (Eigen::Index m = 0; m < 3; ++m) EXPECT_EQ(v(m), s.at(m, 10, 0));
}

TEST(Analyze, Errors) {
  const StftConfig config;
  EXPECT_THROW(analyze({std::vector<double>(1000), std::vector<double>(999)},
                       config),
               Error);
  EXPECT_THROW(analyze({std::vector<double>(100)}, config), Error);
  EXPECT_THROW(analyze({}, config), Error);
}

}  // namespace
}  // namespace bindoa
