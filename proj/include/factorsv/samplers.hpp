#pragma once

#include "factorsv/rng.hpp"
#include "factorsv/types.hpp"

namespace fsv {

// Parameters of the Generalized Inverse Gaussian distribution with density
// proportional to x^{p-1} exp{-(k x + l / x) / 2} on x > 0.
struct GigParams {
  double p = 0.5;  // order
  double k = 1.0;  // coefficient on x
  double l = 1.0;  // coefficient on 1/x

  bool valid() const {
    if (!(k >= 0.0) || !(l >= 0.0)) return false;
    if (k > 0.0 && l > 0.0) return true;
    if (k > 0.0 && l == 0.0 && p > 0.0) return true;
    if (k == 0.0 && l > 0.0 && p < 0.0) return true;
    return false;
  }
};

// Setup-free GIG draw: boundary reductions to Gamma / inverse Gamma,
// ratio-of-uniforms (with and without mode shift) and a three-piece envelope
// for the non-T-concave corner. Never returns 0, infinity, or NaN.
double sample_gig(Rng& rng, const GigParams& params);
inline double sample_gig(Rng& rng, double p, double k, double l) {
  return sample_gig(rng, GigParams{p, k, l});
}

// Shape-rate convention: mean = shape / rate. Binding for every Gamma in the
// artifact.
double sample_gamma(Rng& rng, double shape, double rate);

double sample_beta(Rng& rng, double a0, double b0);

// Draw from N(B * mean_rhs, B) with B = precision^{-1}, via one Cholesky
// factorization of the precision (the covariance is never formed).
Vector sample_mvn_from_precision_factor(Rng& rng, const Eigen::Ref<const Vector>& mean_rhs,
                                        const Eigen::Ref<const Matrix>& precision);

namespace detail {
// Workspace variant used in the Gibbs hot loops: `precision` is preserved,
// `chol_ws` is clobbered, the draw is written into `rhs_to_draw`. Same draw
// sequence and jitter policy as sample_mvn_from_precision_factor.
void mvn_from_precision(Rng& rng, const Eigen::Ref<const Matrix>& precision,
                        Eigen::Ref<Matrix> chol_ws, Eigen::Ref<Vector> rhs_to_draw);
}  // namespace detail

}  // namespace fsv
