#pragma once

// Small dense linear algebra used by the critic and actor: guarded solves,
// symmetric eigendecomposition, PSD projection, vec/unvec and Kronecker
// products. Sizes are tiny (at most a few thousand entries), so everything is
// dense and direct.
//
// Vectorization is column-major everywhere: vec([[1,3],[2,4]]) = (1,2,3,4).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "qnac/errors.hpp"

namespace qnac {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values below rcond * sigma_max are treated as zero.
inline constexpr double kDefaultRcond = 1e-10;
/// Eigenvalues with |lambda| below this are set to zero by project_psd.
inline constexpr double kPsdClampTol = 1e-12;

struct SymEig {
  Vec eigenvalues;   // descending
  Mat eigenvectors;  // orthonormal columns, matching eigenvalues
};

template <typename Derived>
[[nodiscard]] bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw InputError(std::string(what) + ": non-finite input");
  }
}

inline void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw ContractError(std::string(what) + ": matrix is " +
                        std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected square");
  }
}

}  // namespace detail

/// Symmetrizes `m` and returns its eigendecomposition, eigenvalues descending.
[[nodiscard]] inline SymEig sym_eig(const Mat& m) {
  detail::require_square(m, "sym_eig");
  detail::require_finite(m, "sym_eig");
  const Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericError("sym_eig: eigendecomposition failed");
  }
  const Index n = sym.rows();
  SymEig out{Vec(n), Mat(n, n)};
  for (Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = solver.eigenvalues()(n - 1 - i);
    out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

struct SolveReport {
  Vec x;
  double condition = 0.0;  // sigma_max / sigma_min, +inf when singular
  Index rank = 0;          // singular values kept
  bool truncated = false;  // true when the pseudoinverse path was taken
};

/// Solves A x = b. Returns the exact solution when sigma_min > rcond *
/// sigma_max; otherwise the minimum-norm least-squares solution with the small
/// singular values truncated.
[[nodiscard]] inline SolveReport solve_or_pinv_report(const Mat& a, const Vec& b,
                                                      double rcond = kDefaultRcond) {
  detail::require_square(a, "solve_or_pinv");
  if (b.size() != a.rows()) {
    throw ContractError("solve_or_pinv: rhs has " + std::to_string(b.size()) +
                        " entries, matrix has " + std::to_string(a.rows()) + " rows");
  }
  detail::require_finite(a, "solve_or_pinv");
  detail::require_finite(b, "solve_or_pinv");

  SolveReport report;
  const Index n = a.rows();
  if (n == 0) {
    report.x = Vec(0);
    return report;
  }

  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(n - 1);
  report.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

  if (smax == 0.0) {
    report.x = Vec::Zero(n);
    report.truncated = true;
    return report;
  }

  const double cutoff = rcond * smax;
  if (smin > cutoff) {
    report.x = a.partialPivLu().solve(b);
    report.rank = n;
    return report;
  }

  Vec utb = svd.matrixU().transpose() * b;
  for (Index i = 0; i < n; ++i) {
    if (sv(i) > cutoff) {
      utb(i) /= sv(i);
      ++report.rank;
    } else {
      utb(i) = 0.0;
    }
  }
  report.x = svd.matrixV() * utb;
  report.truncated = true;
  return report;
}

[[nodiscard]] inline Vec solve_or_pinv(const Mat& a, const Vec& b,
                                       double rcond = kDefaultRcond) {
  return solve_or_pinv_report(a, b, rcond).x;
}

/// 2-norm condition number; +inf for singular or empty-rank matrices.
[[nodiscard]] inline double condition_number(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(a);
  const Vec& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

struct PsdProjection {
  Mat matrix;
  int clamped = 0;  // eigenvalues below -kPsdClampTol that were raised to 0
};

/// Frobenius-nearest PSD matrix to the symmetric part of `m`.
[[nodiscard]] inline PsdProjection project_psd_counted(const Mat& m) {
  const SymEig eig = sym_eig(m);
  Vec lambda = eig.eigenvalues;
  int clamped = 0;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -kPsdClampTol) ++clamped;
    if (lambda(i) < kPsdClampTol) lambda(i) = 0.0;
  }
  Mat out = eig.eigenvectors * lambda.asDiagonal() * eig.eigenvectors.transpose();
  out = (0.5 * (out + out.transpose())).eval();
  return {std::move(out), clamped};
}

[[nodiscard]] inline Mat project_psd(const Mat& m) { return project_psd_counted(m).matrix; }

/// Column-major stacking.
[[nodiscard]] inline Vec vec_mat(const Mat& m) {
  return Eigen::Map<const Vec>(m.data(), m.size());
}

[[nodiscard]] inline Mat unvec(const Vec& v, Index rows, Index cols) {
  if (rows < 0 || cols < 0 || v.size() != rows * cols) {
    throw ContractError("unvec: " + std::to_string(v.size()) + " entries cannot form a " +
                        std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  }
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

[[nodiscard]] inline Mat kron(const Mat& a, const Mat& b) {
  detail::require_finite(a, "kron");
  detail::require_finite(b, "kron");
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

[[nodiscard]] inline double spectral_radius(const Mat& a) {
  detail::require_square(a, "spectral_radius");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> solver(a, false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("spectral_radius: eigenvalue computation failed");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the symmetric part.
[[nodiscard]] inline double min_sym_eigenvalue(const Mat& m) {
  const SymEig eig = sym_eig(m);
  return eig.eigenvalues(eig.eigenvalues.size() - 1);
}

}  // namespace qnac
