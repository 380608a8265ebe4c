#pragma once

#include <algorithm>
#include <utility>

#include "factorsv/types.hpp"

namespace fsv {

// Log-variances are clamped to [-40, 40] before exponentiation everywhere;
// exp(40) already exceeds any realistic variance and keeps the kernels finite.
inline double clamp_log_variance(double h) { return std::clamp(h, -40.0, 40.0); }

// Sigma_t = Lambda diag(exp h_factor) Lambda' + diag(exp h_idio).
CovarianceAtTime covariance_at(const LoadingsMatrix& loadings,
                               const Eigen::Ref<const Vector>& h_factor_t,
                               const Eigen::Ref<const Vector>& h_idio_t);

Matrix correlation_from_covariance(const Eigen::Ref<const Matrix>& sigma);

// Per-series fraction of conditional variance explained by the common factors,
// plus its cross-sectional mean.
std::pair<Vector, double> communalities(const LoadingsMatrix& loadings,
                                        const Eigen::Ref<const Vector>& h_factor_t,
                                        const Eigen::Ref<const Vector>& h_idio_t);

// Inverse of covariance_at through the Woodbury identity (r x r inner solve).
Matrix precision_woodbury(const LoadingsMatrix& loadings,
                          const Eigen::Ref<const Vector>& h_factor_t,
                          const Eigen::Ref<const Vector>& h_idio_t);

// log det of covariance_at through the matrix determinant lemma.
double logdet_covariance(const LoadingsMatrix& loadings,
                         const Eigen::Ref<const Vector>& h_factor_t,
                         const Eigen::Ref<const Vector>& h_idio_t);

// log N(y; 0, covariance_at(...)) evaluated through the same r x r
// factorization; the workhorse behind the marginal predictive likelihood.
double gaussian_logdensity_woodbury(const LoadingsMatrix& loadings,
                                    const Eigen::Ref<const Vector>& h_factor_t,
                                    const Eigen::Ref<const Vector>& h_idio_t,
                                    const Eigen::Ref<const Vector>& y);

}  // namespace fsv
