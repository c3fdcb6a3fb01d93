#include "bindoa/fft.hpp"

#include <algorithm>
#include <mutex>

#include <fftw3.h>

namespace bindoa {

namespace {

// FFTW planning is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

}  // namespace

RealFft::RealFft(std::size_t length) : length_(length) {
  if (length == 0) {
    throw Error(ErrorCode::kInvalidArgument, "FFT length must be positive");
  }
  std::lock_guard lock(planner_mutex());
  real_ = fftw_alloc_real(length_);
  auto* spectrum = fftw_alloc_complex(num_bins());
  spectrum_ = spectrum;
  const int n = static_cast<int>(length_);
  forward_plan_ = fftw_plan_dft_r2c_1d(n, real_, spectrum, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(n, spectrum, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(real_);
  fftw_free(spectrum_);
}

void RealFft::forward(std::span<const double> input,
                      std::span<Complex> output) {
  if (input.size() != length_ || output.size() != num_bins()) {
    throw Error(ErrorCode::kDimensionMismatch, "FFT buffer size mismatch");
  }
  std::copy(input.begin(), input.end(), real_);
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  const auto* spectrum = static_cast<const fftw_complex*>(spectrum_);
  for (std::size_t k = 0; k < output.size(); ++k) {
    output[k] = Complex(spectrum[k][0], spectrum[k][1]);
  }
}

void RealFft::inverse(std::span<const Complex> input,
                      std::span<double> output) {
  if (input.size() != num_bins() || output.size() != length_) {
    throw Error(ErrorCode::kDimensionMismatch, "FFT buffer size mismatch");
  }
  auto* spectrum = static_cast<fftw_complex*>(spectrum_);
  for (std::size_t k = 0; k < input.size(); ++k) {
    spectrum[k][0] = input[k].real();
    spectrum[k][1] = input[k].imag();
  }
  // c2r destroys its input; the buffer is refilled on every call.
  fftw_execute(static_cast<fftw_plan>(inverse_plan_));
  std::copy(real_, real_ + length_, output.begin());
}

}  // namespace bindoa
