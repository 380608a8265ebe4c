#pragma once

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "factorsv/errors.hpp"
#include "factorsv/types.hpp"

namespace fsv::detail {

// In-place lower Cholesky of the SPD matrix in `a`. Returns false on a
// nonpositive pivot; on success the lower triangle holds L.
inline bool cholesky_lower_inplace(Eigen::Ref<Matrix> a) {
  Eigen::LLT<Eigen::Ref<Matrix>> llt(a);
  return llt.info() == Eigen::Success;
}

// Factorize a copy of `a` with the chain-survival policy: one retry with
// 1e-10 * trace/n added to the diagonal, then numerical_error.
inline Matrix cholesky_spd_with_jitter(const Eigen::Ref<const Matrix>& a, const char* context) {
  const int n = static_cast<int>(a.rows());
  Matrix work = a;
  if (cholesky_lower_inplace(work)) return work;
  const double jitter = 1e-10 * a.trace() / std::max(1, n);
  work = a;
  work.diagonal().array() += jitter;
  if (cholesky_lower_inplace(work)) return work;
  throw numerical_error(std::string(context) +
                        ": Cholesky failed after jitter (trace=" + std::to_string(a.trace()) +
                        ", min diag=" + std::to_string(a.diagonal().minCoeff()) + ")");
}

inline double logdet_from_cholesky(const Eigen::Ref<const Matrix>& chol_lower) {
  return 2.0 * chol_lower.diagonal().array().log().sum();
}

// Solve (L L^T) x = b given the lower factor; b may be a vector or matrix.
template <typename Rhs>
inline void cholesky_solve_inplace(const Eigen::Ref<const Matrix>& chol_lower, Rhs&& b) {
  chol_lower.triangularView<Eigen::Lower>().solveInPlace(b);
  chol_lower.transpose().triangularView<Eigen::Upper>().solveInPlace(b);
}

}  // namespace fsv::detail
