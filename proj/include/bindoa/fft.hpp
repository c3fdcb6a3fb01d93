#pragma once

#include <cstddef>
#include <span>

#include "bindoa/common.hpp"

namespace bindoa {

/// Real-to-complex / complex-to-real FFT pair of fixed length backed by
/// FFTW. Each instance owns its plans and buffers, so separate instances may
/// run concurrently. Transforms are unnormalized.
class RealFft {
 public:
  explicit RealFft(std::size_t length);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t length() const { return length_; }
  std::size_t num_bins() const { return length_ / 2 + 1; }

  /// input.size() == length(), output.size() == num_bins().
  void forward(std::span<const double> input, std::span<Complex> output);
  /// input.size() == num_bins(), output.size() == length().
  void inverse(std::span<const Complex> input, std::span<double> output);

 private:
  std::size_t length_;
  double* real_ = nullptr;
  void* spectrum_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace bindoa
