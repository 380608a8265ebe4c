#include "factorsv/model_core.hpp"

#include <cmath>

#include "factorsv/detail/linalg.hpp"

namespace fsv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dims(const LoadingsMatrix& loadings,
                const Eigen::Ref<const Vector>& h_factor_t,
                const Eigen::Ref<const Vector>& h_idio_t, const char* op) {
  detail::require(h_factor_t.size() == loadings.r() && h_idio_t.size() == loadings.m(),
                  std::string(op) + ": dimension mismatch");
}

// Sigma_bar^{-1} Lambda and the inner matrix V^{-1} + Lambda' Sigma_bar^{-1} Lambda.
struct WoodburyParts {
  Vector idio_prec;   // exp(-h_idio)
  Matrix scaled;      // Sigma_bar^{-1} Lambda, m x r
  Matrix inner_chol;  // lower Cholesky factor of the inner r x r matrix
};

WoodburyParts woodbury_parts(const LoadingsMatrix& loadings,
                             const Eigen::Ref<const Vector>& h_factor_t,
                             const Eigen::Ref<const Vector>& h_idio_t, const char* op) {
  WoodburyParts parts;
  const int m = loadings.m(), r = loadings.r();
  parts.idio_prec.resize(m);
  for (int i = 0; i < m; ++i) parts.idio_prec[i] = std::exp(-clamp_log_variance(h_idio_t[i]));
  parts.scaled.noalias() = parts.idio_prec.asDiagonal() * loadings.entries;
  Matrix inner(r, r);
  inner.noalias() = loadings.entries.transpose() * parts.scaled;
  for (int j = 0; j < r; ++j) inner(j, j) += std::exp(-clamp_log_variance(h_factor_t[j]));
  parts.inner_chol = detail::cholesky_spd_with_jitter(inner, op);
  return parts;
}

}  // namespace

CovarianceAtTime covariance_at(const LoadingsMatrix& loadings,
                               const Eigen::Ref<const Vector>& h_factor_t,
                               const Eigen::Ref<const Vector>& h_idio_t) {
  check_dims(loadings, h_factor_t, h_idio_t, "covariance_at");
  const int m = loadings.m(), r = loadings.r();
  Matrix sigma = Matrix::Zero(m, m);
  if (r > 0) {
    Matrix scaled = loadings.entries;
    for (int j = 0; j < r; ++j) scaled.col(j) *= std::exp(0.5 * clamp_log_variance(h_factor_t[j]));
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  }
  for (int i = 0; i < m; ++i) sigma(i, i) += std::exp(clamp_log_variance(h_idio_t[i]));
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  return CovarianceAtTime{std::move(sigma), -1};
}

Matrix correlation_from_covariance(const Eigen::Ref<const Matrix>& sigma) {
  detail::require(sigma.rows() == sigma.cols(), "correlation_from_covariance: not square");
  const int m = static_cast<int>(sigma.rows());
  for (int i = 0; i < m; ++i)
    if (!(sigma(i, i) > 0.0))
      throw domain_error("correlation_from_covariance: nonpositive diagonal at index " +
                         std::to_string(i));
  Vector inv_sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
  Matrix corr = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) corr(i, j) = std::clamp(corr(i, j), -1.0, 1.0);
    corr(j, j) = 1.0;
  }
  return corr;
}

std::pair<Vector, double> communalities(const LoadingsMatrix& loadings,
                                        const Eigen::Ref<const Vector>& h_factor_t,
                                        const Eigen::Ref<const Vector>& h_idio_t) {
  check_dims(loadings, h_factor_t, h_idio_t, "communalities");
  const CovarianceAtTime cov = covariance_at(loadings, h_factor_t, h_idio_t);
  const int m = loadings.m();
  Vector per(m);
  for (int i = 0; i < m; ++i) {
    const double idio = std::exp(clamp_log_variance(h_idio_t[i]));
    per[i] = std::clamp(1.0 - idio / cov.sigma(i, i), 0.0, 1.0);
  }
  return {per, per.mean()};
}

Matrix precision_woodbury(const LoadingsMatrix& loadings,
                          const Eigen::Ref<const Vector>& h_factor_t,
                          const Eigen::Ref<const Vector>& h_idio_t) {
  check_dims(loadings, h_factor_t, h_idio_t, "precision_woodbury");
  const int m = loadings.m(), r = loadings.r();
  if (r == 0) {
    Matrix p = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) p(i, i) = std::exp(-clamp_log_variance(h_idio_t[i]));
    return p;
  }
  WoodburyParts parts = woodbury_parts(loadings, h_factor_t, h_idio_t, "precision_woodbury");
  Matrix solved = parts.scaled.transpose();  // r x m
  detail::cholesky_solve_inplace(parts.inner_chol, solved);
  Matrix prec(m, m);
  prec.noalias() = -parts.scaled * solved;
  prec.diagonal() += parts.idio_prec;
  prec = 0.5 * (prec + prec.transpose()).eval();
  return prec;
}

double logdet_covariance(const LoadingsMatrix& loadings,
                         const Eigen::Ref<const Vector>& h_factor_t,
                         const Eigen::Ref<const Vector>& h_idio_t) {
  check_dims(loadings, h_factor_t, h_idio_t, "logdet_covariance");
  const int m = loadings.m(), r = loadings.r();
  double logdet = 0.0;
  for (int i = 0; i < m; ++i) logdet += clamp_log_variance(h_idio_t[i]);
  if (r == 0) return logdet;
  for (int j = 0; j < r; ++j) logdet += clamp_log_variance(h_factor_t[j]);
  WoodburyParts parts = woodbury_parts(loadings, h_factor_t, h_idio_t, "logdet_covariance");
  return logdet + detail::logdet_from_cholesky(parts.inner_chol);
}

double gaussian_logdensity_woodbury(const LoadingsMatrix& loadings,
                                    const Eigen::Ref<const Vector>& h_factor_t,
                                    const Eigen::Ref<const Vector>& h_idio_t,
                                    const Eigen::Ref<const Vector>& y) {
  check_dims(loadings, h_factor_t, h_idio_t, "gaussian_logdensity_woodbury");
  detail::require(y.size() == loadings.m(), "gaussian_logdensity_woodbury: y size mismatch");
  const int m = loadings.m(), r = loadings.r();
  double logdet = 0.0, quad = 0.0;
  Vector wy(m);  // Sigma_bar^{-1} y
  for (int i = 0; i < m; ++i) {
    const double h = clamp_log_variance(h_idio_t[i]);
    logdet += h;
    wy[i] = std::exp(-h) * y[i];
    quad += wy[i] * y[i];
  }
  if (r > 0) {
    for (int j = 0; j < r; ++j) logdet += clamp_log_variance(h_factor_t[j]);
    WoodburyParts parts =
        woodbury_parts(loadings, h_factor_t, h_idio_t, "gaussian_logdensity_woodbury");
    logdet += detail::logdet_from_cholesky(parts.inner_chol);
    Vector proj = loadings.entries.transpose() * wy;  // Lambda' Sigma_bar^{-1} y
    parts.inner_chol.triangularView<Eigen::Lower>().solveInPlace(proj);
    quad -= proj.squaredNorm();
  }
  return -0.5 * (m * kLog2Pi + logdet + quad);
}

void ReturnsPanel::validate() const {
  detail::require(values.rows() >= 1 && values.cols() >= 2, "ReturnsPanel: need m >= 1, T >= 2");
  if (!values.allFinite()) throw domain_error("ReturnsPanel: non-finite entries");
  detail::require(series_labels.empty() || series_labels.size() == static_cast<size_t>(values.rows()),
                  "ReturnsPanel: series label count mismatch");
  detail::require(date_labels.empty() || date_labels.size() == static_cast<size_t>(values.cols()),
                  "ReturnsPanel: date label count mismatch");
  if (demeaned) {
    for (int i = 0; i < values.rows(); ++i) {
      const double scale = std::max(1.0, values.row(i).cwiseAbs().maxCoeff());
      if (std::abs(values.row(i).mean()) > 1e-10 * scale)
        throw domain_error("ReturnsPanel: demeaned flag set but row " + std::to_string(i) +
                           " has nonzero mean");
    }
  }
}

void LoadingsMatrix::validate() const {
  if (!entries.allFinite()) throw domain_error("LoadingsMatrix: non-finite entries");
  if (restricted) {
    for (int i = 0; i < entries.rows(); ++i)
      for (int j = i + 1; j < entries.cols(); ++j)
        if (entries(i, j) != 0.0)
          throw domain_error("LoadingsMatrix: restricted but entry above diagonal is nonzero");
  }
}

}  // namespace fsv
