#include "factorsv/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "factorsv/detail/linalg.hpp"

namespace fsv {

namespace {

// ---------------------------------------------------------------------------
// Two-parameter GIG core: density g(z) proportional to
// z^{lambda-1} exp(-omega (z + 1/z) / 2) with lambda >= 0, omega > 0.
// ---------------------------------------------------------------------------

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0)
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  // reciprocal form avoids cancellation for 0 <= lambda < 1
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms without mode shift; T-concave region
// (lambda <= 2, omega <= 3, and lambda >= 1 - 2.25 omega^2 or omega > 0.2).
double gig_rou_noshift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym =
      ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.u01();
    const double v = rng.u01();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Ratio-of-uniforms with shift by the mode; for lambda > 2 or omega > 3 the
// bounding rectangle of the shifted density stays numerically tight.
double gig_rou_shift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  // stationary points of (x - xm) sqrt(g(x)): roots of x^3 + a x^2 + b x + c
  const double a = -2.0 * (lambda + 1.0) / omega - xm;
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double arg = std::clamp(-q / (2.0 * std::sqrt(-p * p * p / 27.0)), -1.0, 1.0);
  const double phi = std::acos(arg);
  const double fac = 2.0 * std::sqrt(-p / 3.0);
  const double root_hi = fac * std::cos(phi / 3.0) - a / 3.0;
  const double root_lo = fac * std::cos(phi / 3.0 + 4.0 * M_PI / 3.0) - a / 3.0;
  const double u_hi =
      (root_hi - xm) * std::exp(t * std::log(root_hi) - s * (root_hi + 1.0 / root_hi) - nc);
  const double u_lo =
      (root_lo - xm) * std::exp(t * std::log(root_lo) - s * (root_lo + 1.0 / root_lo) - nc);
  for (;;) {
    const double u = u_lo + rng.u01() * (u_hi - u_lo);
    const double v = rng.u01();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Rejection from a three-piece envelope (flat top, x^{lambda-1} middle,
// exponential tail); handles 0 <= lambda < 1 with omega <= 0.2 where the
// density is not T-concave.
double gig_three_piece(Rng& rng, double lambda, double omega) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double k1 = 0.0, k2 = 0.0;
  const double area0 = k0 * x0;
  double area1 = 0.0, area2 = 0.0;
  if (x0 >= 2.0 / omega) {
    k2 = std::pow(x0, lambda - 1.0);
    area2 = k2 * 2.0 * std::exp(-0.5 * omega * x0) / omega;
  } else {
    k1 = std::exp(-omega);
    area1 = (lambda == 0.0)
                ? k1 * std::log(2.0 / (omega * omega))
                : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area2 = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area0 + area1 + area2;
  for (;;) {
    double v = total * rng.u01();
    double x, hat;
    if (v <= area0) {
      x = x0 * v / area0;
      hat = k0;
    } else if ((v -= area0) <= area1) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hat = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hat = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area1;
      const double lo = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-0.5 * omega * lo) - 0.5 * omega / k2 * v);
      hat = k2 * std::exp(-0.5 * omega * x);
    }
    const double u = rng.u01() * hat;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x)) return x;
  }
}

double gig_two_param(Rng& rng, double lambda, double omega) {
  if (lambda > 2.0 || omega > 3.0) return gig_rou_shift(rng, lambda, omega);
  if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2)
    return gig_rou_noshift(rng, lambda, omega);
  return gig_three_piece(rng, lambda, omega);
}

double clamp_positive_finite(double x) {
  if (!(x >= std::numeric_limits<double>::min())) return std::numeric_limits<double>::min();
  if (x > std::numeric_limits<double>::max() || !std::isfinite(x))
    return std::numeric_limits<double>::max();
  return x;
}

}  // namespace

double sample_gig(Rng& rng, const GigParams& params) {
  double p = params.p, k = params.k, l = params.l;
  if (!std::isfinite(p) || !std::isfinite(k) || !std::isfinite(l) || k < 0.0 || l < 0.0)
    throw domain_error("sample_gig: parameters must be finite with k, l >= 0");
  if (k == 0.0 && l == 0.0) throw domain_error("sample_gig: invalid parameter region (k = l = 0)");

  // Boundary reductions and tiny-argument guards. A coefficient below 1e-300
  // relative (including an exact zero produced by squaring underflow) is
  // treated as the matching Gamma / inverse-Gamma boundary case when the order
  // allows it, and clamped otherwise so long shrinkage chains survive
  // underflowing loadings.
  constexpr double kTinyRel = 1e-300;
  if (l < kTinyRel * std::max(k, 1.0)) {
    if (p > 0.0) return clamp_positive_finite(sample_gamma(rng, p, 0.5 * k));
    l = kTinyRel * std::max(k, 1.0);
  }
  if (k < kTinyRel * std::max(l, 1.0)) {
    if (p < 0.0) return clamp_positive_finite(1.0 / sample_gamma(rng, -p, 0.5 * l));
    k = kTinyRel * std::max(l, 1.0);
  }

  // Reduce to nonnegative order via X ~ GIG(p,k,l) <=> 1/X ~ GIG(-p,l,k).
  const bool flip = p < 0.0;
  const double lambda = flip ? -p : p;
  const double psi = flip ? l : k;
  const double chi = flip ? k : l;
  const double alpha = std::sqrt(chi / psi);
  const double omega = std::sqrt(psi * chi);
  double x = alpha * gig_two_param(rng, lambda, omega);
  if (flip) x = 1.0 / x;
  return clamp_positive_finite(x);
}

double sample_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw domain_error("sample_gamma: shape and rate must be > 0");
  if (shape < 1.0) {
    // boost a (shape+1) draw down with u^{1/shape}
    const double u = rng.u01();
    return sample_gamma(rng, shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double z, v;
    do {
      z = rng.normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.u01();
    if (u < 1.0 - 0.0331 * z * z * z * z) return d * v / rate;
    if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double sample_beta(Rng& rng, double a0, double b0) {
  if (!(a0 > 0.0) || !(b0 > 0.0)) throw domain_error("sample_beta: parameters must be > 0");
  for (;;) {
    const double x = sample_gamma(rng, a0, 1.0);
    const double y = sample_gamma(rng, b0, 1.0);
    const double s = x + y;
    if (s > 0.0) {
      const double r = x / s;
      if (r > 0.0 && r < 1.0) return r;
    }
  }
}

namespace detail {

void mvn_from_precision(Rng& rng, const Eigen::Ref<const Matrix>& precision,
                        Eigen::Ref<Matrix> chol_ws, Eigen::Ref<Vector> rhs_to_draw) {
  const int n = static_cast<int>(precision.rows());
  chol_ws = precision;
  if (!cholesky_lower_inplace(chol_ws)) {
    chol_ws = precision;
    chol_ws.diagonal().array() += 1e-10 * precision.trace() / std::max(1, n);
    if (!cholesky_lower_inplace(chol_ws))
      throw numerical_error("mvn_from_precision: precision not positive definite after jitter");
  }
  // x = L^{-T} (L^{-1} rhs + z): mean solve and noise back-substitution share
  // the factor; the covariance is never formed.
  chol_ws.triangularView<Eigen::Lower>().solveInPlace(rhs_to_draw);
  for (int i = 0; i < n; ++i) rhs_to_draw[i] += rng.normal();
  chol_ws.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs_to_draw);
}

}  // namespace detail

Vector sample_mvn_from_precision_factor(Rng& rng, const Eigen::Ref<const Vector>& mean_rhs,
                                        const Eigen::Ref<const Matrix>& precision) {
  detail::require(precision.rows() == precision.cols() && precision.rows() == mean_rhs.size(),
                  "sample_mvn_from_precision_factor: dimension mismatch");
  Matrix chol_ws(precision.rows(), precision.cols());
  Vector draw = mean_rhs;
  detail::mvn_from_precision(rng, precision, chol_ws, draw);
  return draw;
}

}  // namespace fsv
