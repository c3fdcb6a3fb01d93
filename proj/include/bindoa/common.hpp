#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bindoa {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
  kInvalidArgument = 1,
  kDimensionMismatch,
  kNumerical,
  kConfig,
  kIo,
};

/// Exception type thrown by all library code. The code survives the trip
/// through the C API as a status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Floating-point operation tally used to compare estimator cost.
/// Real add/mul/div/sqrt count as one each; complex multiply counts as 6,
/// complex add as 2, complex divide as 11.
struct FlopCounter {
  std::uint64_t flops = 0;

  void real(std::uint64_t n = 1) { flops += n; }
  void cmul(std::uint64_t n = 1) { flops += 6 * n; }
  void cadd(std::uint64_t n = 1) { flops += 2 * n; }
  void cdiv(std::uint64_t n = 1) { flops += 11 * n; }
};

}  // namespace bindoa
