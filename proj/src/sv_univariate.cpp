#include "factorsv/sv_univariate.hpp"

#include <cmath>
#include <limits>

#include "factorsv/samplers.hpp"

namespace fsv {

namespace sv_detail {
const double kMixtureProb[kMixtureSize] = {0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                                           0.18842, 0.12047, 0.05591, 0.01575, 0.00115};
const double kMixtureMean[kMixtureSize] = {1.92677,  1.34744,  0.73504,  0.02266,  -0.85173,
                                           -1.97278, -3.46788, -5.55246, -8.68384, -14.65000};
const double kMixtureVar[kMixtureSize] = {0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                                          0.98583, 1.57469, 2.54498, 4.16591, 7.33342};
}  // namespace sv_detail

void SvUpdateWorkspace::resize(int T) {
  ystar.resize(T);
  mixture.resize(T);
  diag.resize(T + 1);
  offdiag.resize(T);
  rhs.resize(T + 1);
  noise.resize(T + 1);
  htilde.resize(T + 1);
}

namespace {

using sv_detail::kMixtureMean;
using sv_detail::kMixtureProb;
using sv_detail::kMixtureSize;
using sv_detail::kMixtureVar;

struct MixtureTables {
  double log_weight[kMixtureSize];  // log(p_j) - 0.5 log(v2_j)
  double inv_var[kMixtureSize];
  MixtureTables() {
    for (int j = 0; j < kMixtureSize; ++j) {
      log_weight[j] = std::log(kMixtureProb[j]) - 0.5 * std::log(kMixtureVar[j]);
      inv_var[j] = 1.0 / kMixtureVar[j];
    }
  }
};
const MixtureTables kTab;

void draw_indicators(Rng& rng, const Vector& states, SvUpdateWorkspace& ws) {
  const int T = static_cast<int>(ws.ystar.size());
  double lw[kMixtureSize], w[kMixtureSize];
  for (int t = 0; t < T; ++t) {
    const double resid = ws.ystar[t] - states[t + 1];
    double max_lw = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < kMixtureSize; ++j) {
      const double d = resid - kMixtureMean[j];
      lw[j] = kTab.log_weight[j] - 0.5 * d * d * kTab.inv_var[j];
      if (lw[j] > max_lw) max_lw = lw[j];
    }
    double total = 0.0;
    for (int j = 0; j < kMixtureSize; ++j) total += (w[j] = std::exp(lw[j] - max_lw));
    double u = rng.u01() * total;
    int pick = kMixtureSize - 1;
    for (int j = 0; j < kMixtureSize; ++j) {
      u -= w[j];
      if (u <= 0.0) {
        pick = j;
        break;
      }
    }
    ws.mixture[t] = pick;
  }
}

// Joint draw of the full state path from its Gaussian full conditional via a
// Cholesky factorization of the tridiagonal precision (all-at-once sampler).
void draw_states(Rng& rng, SvBlock& block, SvUpdateWorkspace& ws) {
  const int T = static_cast<int>(ws.ystar.size());
  const double mu = block.has_level ? block.params.mu : 0.0;
  const double phi = block.params.phi;
  const double sig2 = block.params.sigma * block.params.sigma;
  const double inv_sig2 = 1.0 / sig2;

  ws.diag[0] = inv_sig2;
  ws.rhs[0] = mu * (1.0 - phi) * inv_sig2;
  for (int t = 1; t <= T; ++t) {
    const int s = ws.mixture[t - 1];
    const double obs_prec = kTab.inv_var[s];
    ws.diag[t] = (t < T ? (1.0 + phi * phi) * inv_sig2 : inv_sig2) + obs_prec;
    ws.offdiag[t - 1] = -phi * inv_sig2;
    const double prior_rhs = (t < T) ? mu * (1.0 - phi) * (1.0 - phi) * inv_sig2
                                     : mu * (1.0 - phi) * inv_sig2;
    ws.rhs[t] = (ws.ystar[t - 1] - kMixtureMean[s]) * obs_prec + prior_rhs;
  }

  // in-place bidiagonal Cholesky: diag -> d, offdiag -> e
  for (int t = 0; t <= T; ++t) {
    double v = ws.diag[t];
    if (t > 0) v -= ws.offdiag[t - 1] * ws.offdiag[t - 1];
    if (!(v > 0.0)) throw numerical_error("sv_update: state precision lost definiteness");
    ws.diag[t] = std::sqrt(v);
    if (t < T) ws.offdiag[t] /= ws.diag[t];
  }
  // forward solve L a = rhs
  ws.rhs[0] /= ws.diag[0];
  for (int t = 1; t <= T; ++t)
    ws.rhs[t] = (ws.rhs[t] - ws.offdiag[t - 1] * ws.rhs[t - 1]) / ws.diag[t];
  // back substitute L' h = a + z
  for (int t = 0; t <= T; ++t) ws.noise[t] = rng.normal();
  block.states[T] = (ws.rhs[T] + ws.noise[T]) / ws.diag[T];
  for (int t = T - 1; t >= 0; --t)
    block.states[t] = (ws.rhs[t] + ws.noise[t] - ws.offdiag[t] * block.states[t + 1]) / ws.diag[t];
}

// Centered-parameterization parameter update: exact GIG draw for sigma^2,
// exact Gaussian draw for mu, Metropolis-Hastings with the conjugate
// AR-regression proposal for phi.
void draw_params_centered(Rng& rng, SvBlock& block, const SvPriors& priors) {
  const Vector& h = block.states;
  const int T = static_cast<int>(h.size()) - 1;
  double mu = block.has_level ? block.params.mu : 0.0;
  double phi = block.params.phi;

  // sigma^2 | h, mu, phi ~ GIG(-T/2, 1/B_sigma, S)
  double s_quad = (1.0 - phi * phi) * (h[0] - mu) * (h[0] - mu);
  for (int t = 1; t <= T; ++t) {
    const double e = h[t] - mu - phi * (h[t - 1] - mu);
    s_quad += e * e;
  }
  double sig2 = sample_gig(rng, -0.5 * T, 1.0 / priors.B_sigma, s_quad);
  block.params.sigma = std::sqrt(sig2);

  if (block.has_level) {
    // mu | h, phi, sigma^2: Gaussian regression + stationary initial term
    const double om = 1.0 - phi;
    double prec = ((1.0 - phi * phi) + T * om * om) / sig2 + 1.0 / priors.B_mu;
    double num = (1.0 - phi * phi) * h[0] / sig2 + priors.b_mu / priors.B_mu;
    for (int t = 1; t <= T; ++t) num += om * (h[t] - phi * h[t - 1]) / sig2;
    mu = rng.normal(num / prec, std::sqrt(1.0 / prec));
    block.params.mu = mu;
  }

  // phi | h, mu, sigma^2
  double sxx = 0.0, sxw = 0.0;
  for (int t = 1; t <= T; ++t) {
    const double x = h[t - 1] - mu;
    sxx += x * x;
    sxw += x * (h[t] - mu);
  }
  if (sxx > 1e-300) {
    const double prop = rng.normal(sxw / sxx, std::sqrt(sig2 / sxx));
    if (std::abs(prop) < 1.0) {
      auto log_target_extra = [&](double f) {
        return 0.5 * std::log(1.0 - f * f) -
               (1.0 - f * f) * (h[0] - mu) * (h[0] - mu) / (2.0 * sig2) +
               (priors.a0 - 1.0) * std::log(1.0 + f) + (priors.b0 - 1.0) * std::log(1.0 - f);
      };
      if (std::log(rng.u01()) < log_target_extra(prop) - log_target_extra(phi))
        block.params.phi = prop;
    }
  }
}

// Ancillarity-sufficiency interweaving: re-express the path noncentered,
// redraw level and signed scale from the conjugate observation regression
// (sigma^2 ~ B_sigma chi^2_1 is N(0, B_sigma) on the signed scale), map back.
void interweave_noncentered(Rng& rng, SvBlock& block, const SvPriors& priors,
                            SvUpdateWorkspace& ws) {
  const int T = static_cast<int>(ws.ystar.size());
  const double mu = block.has_level ? block.params.mu : 0.0;
  const double sigma = block.params.sigma;
  for (int t = 0; t <= T; ++t) ws.htilde[t] = (block.states[t] - mu) / sigma;

  double s_ww = 0.0, s_wh = 0.0, s_hh = 0.0, s_w1 = 0.0, s_h1 = 0.0;
  for (int t = 0; t < T; ++t) {
    const int s = ws.mixture[t];
    const double iv = kTab.inv_var[s];
    const double z = ws.ystar[t] - kMixtureMean[s];
    const double ht = ws.htilde[t + 1];
    s_w1 += iv;
    s_h1 += iv * ht;
    s_hh += iv * ht * ht;
    s_ww += iv * z;
    s_wh += iv * z * ht;
  }

  if (block.has_level) {
    // joint (mu, signed sigma) from the 2x2 canonical Gaussian
    const double p00 = s_w1 + 1.0 / priors.B_mu;
    const double p01 = s_h1;
    const double p11 = s_hh + 1.0 / priors.B_sigma;
    const double r0 = s_ww + priors.b_mu / priors.B_mu;
    const double r1 = s_wh;
    const double l00 = std::sqrt(p00);
    const double l10 = p01 / l00;
    const double d11 = p11 - l10 * l10;
    if (!(d11 > 0.0)) return;  // degenerate regression; keep the centered draw
    const double l11 = std::sqrt(d11);
    const double a0 = r0 / l00;
    const double a1 = (r1 - l10 * a0) / l11;
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    const double sig_signed = (a1 + z1) / l11;
    const double mu_new = (a0 + z0 - l10 * sig_signed) / l00;
    if (std::abs(sig_signed) < 1e-300) return;
    block.params.mu = mu_new;
    block.params.sigma = std::abs(sig_signed);
    for (int t = 0; t <= T; ++t) block.states[t] = mu_new + sig_signed * ws.htilde[t];
  } else {
    const double prec = s_hh + 1.0 / priors.B_sigma;
    const double sig_signed = rng.normal(s_wh / prec, std::sqrt(1.0 / prec));
    if (std::abs(sig_signed) < 1e-300) return;
    block.params.sigma = std::abs(sig_signed);
    for (int t = 0; t <= T; ++t) block.states[t] = sig_signed * ws.htilde[t];
  }
}

}  // namespace

void sv_update(Rng& rng, const Eigen::Ref<const Vector>& observations, SvBlock& block,
               const SvPriors& priors, SvUpdateWorkspace& ws) {
  const int T = static_cast<int>(observations.size());
  detail::require(T >= 1, "sv_update: T == 0");
  detail::require(block.states.size() == T + 1, "sv_update: states length must be T+1");
  if (!observations.allFinite()) throw domain_error("sv_update: non-finite observations");
  priors.validate();
  block.params.validate();
  detail::require(block.has_level || block.params.mu == 0.0,
                  "sv_update: factor block must have mu == 0");

  ws.resize(T);
  for (int t = 0; t < T; ++t)
    ws.ystar[t] = std::log(observations[t] * observations[t] + sv_detail::kLogOffset);

  draw_indicators(rng, block.states, ws);
  draw_states(rng, block, ws);
  draw_params_centered(rng, block, priors);
  interweave_noncentered(rng, block, priors, ws);
}

double sv_stationary_init(Rng& rng, const SvParams& params, bool has_level) {
  if (!(std::abs(params.phi) < 1.0))
    throw domain_error("sv_stationary_init: |phi| must be < 1");
  const double mean = has_level ? params.mu : 0.0;
  const double sd = params.sigma / std::sqrt(1.0 - params.phi * params.phi);
  return rng.normal(mean, sd);
}

}  // namespace fsv
