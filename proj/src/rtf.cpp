#include "bindoa/rtf.hpp"

#include <cmath>
#include <string>

namespace bindoa {

namespace {

constexpr double kMinNormalizer = 1e-12;
constexpr double kLoadingFactor = 1e-8;

void require_square(const CMatrix& m, const char* name) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(name) + " must be a nonempty square matrix");
  }
}

// Rotates v so its first non-negligible entry is real positive.
void normalize_phase(CVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    if (mag > 1e-14) {
      v *= std::conj(v(i)) / mag;
      v(i) = Complex(std::abs(v(i)), 0.0);
      return;
    }
  }
}

// Solves L x = b in place for lower-triangular L.
void forward_substitute(const CMatrix& lower, CMatrix& rhs,
                        FlopCounter* flops) {
  const Eigen::Index n = lower.rows();
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Complex acc = rhs(i, c);
      for (Eigen::Index k = 0; k < i; ++k) acc -= lower(i, k) * rhs(k, c);
      rhs(i, c) = acc / lower(i, i).real();
      if (flops != nullptr) {
        flops->cmul(static_cast<std::uint64_t>(i));
        flops->cadd(static_cast<std::uint64_t>(i));
        flops->real(2);
      }
    }
  }
}

RtfEstimate finish(CVector g, RtfMethod method, FlopCounter* flops) {
  RtfEstimate est;
  est.method = method;
  const Complex first = g(0);
  if (!(std::abs(first) >= kMinNormalizer) || !g.allFinite()) {
    est.g_h = std::move(g);
    est.valid = false;
    return est;
  }
  for (Eigen::Index i = 1; i < g.size(); ++i) g(i) /= first;
  g(0) = Complex(1.0, 0.0);
  if (flops != nullptr) flops->cdiv(static_cast<std::uint64_t>(g.size() - 1));
  est.valid = g.allFinite();
  est.g_h = std::move(g);
  return est;
}

}  // namespace

const char* to_string(RtfMethod method) {
  return method == RtfMethod::kCw ? "CW" : "SC";
}

CMatrix cholesky(const CMatrix& phi, FlopCounter* flops) {
  require_square(phi, "covariance");
  const Eigen::Index n = phi.rows();
  CMatrix lower = CMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = phi(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) diag -= std::norm(lower(j, k));
    if (flops != nullptr) flops->real(3 * static_cast<std::uint64_t>(j) + 1);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw Error(ErrorCode::kNumerical,
                  "matrix is not positive definite (pivot " +
                      std::to_string(j) + ")");
    }
    const double root = std::sqrt(diag);
    lower(j, j) = Complex(root, 0.0);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      Complex acc = phi(i, j);
      for (Eigen::Index k = 0; k < j; ++k) {
        acc -= lower(i, k) * std::conj(lower(j, k));
      }
      lower(i, j) = acc / root;
      if (flops != nullptr) {
        flops->cmul(static_cast<std::uint64_t>(j));
        flops->cadd(static_cast<std::uint64_t>(j));
        flops->real(2);
      }
    }
  }
  return lower;
}

EigenResult principal_eigenvector(const CMatrix& phi, FlopCounter* flops) {
  require_square(phi, "matrix");
  const Eigen::Index n = phi.rows();
  EigenResult result;

  // Start from the column with the largest norm; it has a nonzero
  // component along the dominant eigenvector unless phi is degenerate.
  Eigen::Index start = 0;
  double best = -1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = phi.col(j).squaredNorm();
    if (norm > best) {
      best = norm;
      start = j;
    }
  }
  CVector v = phi.col(start);
  if (!(v.norm() > 0.0)) {
    v = CVector::Zero(n);
    v(0) = 1.0;
  }
  v.normalize();
  normalize_phase(v);

  CVector next(n);
  for (std::size_t it = 1; it <= kPowerIterationMaxIterations; ++it) {
    next.noalias() = phi * v;
    if (flops != nullptr) {
      const auto nn = static_cast<std::uint64_t>(n * n);
      flops->cmul(nn);
      flops->cadd(nn);
      flops->real(3 * static_cast<std::uint64_t>(n) + 1);
    }
    const double norm = next.norm();
    result.iterations = it;
    if (!(norm > 0.0)) {
      // Zero matrix: every vector is an eigenvector.
      result.vector = v;
      result.eigenvalue = 0.0;
      result.converged = true;
      return result;
    }
    next /= norm;
    normalize_phase(next);
    const double step = (next - v).norm();
    v.swap(next);
    if (step < kPowerIterationTolerance) {
      result.converged = true;
      break;
    }
  }
  result.vector = v;
  result.eigenvalue = (v.adjoint() * phi * v)(0).real();
  return result;
}

RtfEstimate estimate_rtf_cw(const CMatrix& phi_y, const CMatrix& phi_u,
                            FlopCounter* flops) {
  require_square(phi_y, "phi_y");
  require_square(phi_u, "phi_u");
  if (phi_y.rows() != phi_u.rows() || phi_y.rows() < 2) {
    throw Error(ErrorCode::kDimensionMismatch,
                "covariances must share a size of at least 2");
  }
  const Eigen::Index m = phi_y.rows() - 1;
  CMatrix head_u = phi_u.topLeftCorner(m, m);
  CMatrix head_y = phi_y.topLeftCorner(m, m);

  const double load =
      kLoadingFactor * head_u.diagonal().real().sum() / static_cast<double>(m);
  head_u.diagonal().array() += load;
  head_y.diagonal().array() += load;

  const CMatrix lower = cholesky(head_u, flops);

  // whitened = L^-1 phi_y L^-H, formed as L^-1 (L^-1 phi_y)^H.
  CMatrix left = head_y;
  forward_substitute(lower, left, flops);
  CMatrix whitened = left.adjoint();
  forward_substitute(lower, whitened, flops);
  whitened = (0.5 * (whitened + whitened.adjoint())).eval();

  const EigenResult eig = principal_eigenvector(whitened, flops);

  CVector g = lower.triangularView<Eigen::Lower>() * eig.vector;
  if (flops != nullptr) {
    const auto tri = static_cast<std::uint64_t>(m * (m + 1) / 2);
    flops->cmul(tri);
    flops->cadd(tri);
  }
  RtfEstimate est = finish(std::move(g), RtfMethod::kCw, flops);
  est.converged = eig.converged;
  return est;
}

RtfEstimate estimate_rtf_cw_with_factor(const CMatrix& phi_y_head,
                                        const CMatrix& factor) {
  require_square(phi_y_head, "phi_y");
  require_square(factor, "factor");
  if (factor.rows() != phi_y_head.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "factor size mismatch");
  }
  Eigen::FullPivLU<CMatrix> lu(factor);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kNumerical, "square-root factor is singular");
  }
  const CMatrix left = lu.solve(phi_y_head);
  CMatrix whitened = lu.solve(CMatrix(left.adjoint()));
  whitened = (0.5 * (whitened + whitened.adjoint())).eval();
  const EigenResult eig = principal_eigenvector(whitened);
  RtfEstimate est = finish(factor * eig.vector, RtfMethod::kCw, nullptr);
  est.converged = eig.converged;
  return est;
}

RtfEstimate estimate_rtf_sc(const CMatrix& phi_y, FlopCounter* flops) {
  require_square(phi_y, "phi_y");
  if (phi_y.rows() < 2) {
    throw Error(ErrorCode::kDimensionMismatch,
                "SC needs at least one head and one external channel");
  }
  const Eigen::Index m = phi_y.rows() - 1;
  return finish(phi_y.col(m).head(m), RtfMethod::kSc, flops);
}

}  // namespace bindoa
