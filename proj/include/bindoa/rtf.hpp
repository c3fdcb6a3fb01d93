#pragma once

#include <cstddef>

#include "bindoa/common.hpp"

namespace bindoa {

enum class RtfMethod { kCw, kSc };

const char* to_string(RtfMethod method);

/// Head-mounted RTF vector for one time-frequency bin. The first element is
/// exactly 1 when valid.
struct RtfEstimate {
  CVector g_h;
  RtfMethod method = RtfMethod::kSc;
  std::size_t bin = 0;
  std::size_t frame = 0;
  bool valid = false;
  /// False when the eigenvector iteration hit its cap (CW only).
  bool converged = true;
};

/// Lower-triangular L with L * L^H = phi. Throws kNumerical when phi is not
/// positive definite.
CMatrix cholesky(const CMatrix& phi, FlopCounter* flops = nullptr);

struct EigenResult {
  CVector vector;  // unit norm, first nonzero entry real positive
  double eigenvalue = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr double kPowerIterationTolerance = 1e-12;
inline constexpr std::size_t kPowerIterationMaxIterations = 500;

/// Dominant eigenpair of a Hermitian matrix by power iteration.
EigenResult principal_eigenvector(const CMatrix& phi,
                                  FlopCounter* flops = nullptr);

/// Covariance whitening on the head block of (M+1)x(M+1) covariances.
/// Both head blocks receive the same diagonal load 1e-8 * trace(phi_u)/M.
RtfEstimate estimate_rtf_cw(const CMatrix& phi_y, const CMatrix& phi_u,
                            FlopCounter* flops = nullptr);

/// Covariance whitening with an arbitrary square-root factor S of the
/// head-block undesired covariance (S * S^H = phi_u_head). phi_y_head is
/// M x M. No loading is applied.
RtfEstimate estimate_rtf_cw_with_factor(const CMatrix& phi_y_head,
                                        const CMatrix& factor);

/// Spatial coherence estimate from the last column of the full noisy
/// covariance. Invalid when the reference-to-external cross term vanishes.
RtfEstimate estimate_rtf_sc(const CMatrix& phi_y,
                            FlopCounter* flops = nullptr);

}  // namespace bindoa
