#pragma once

// Successive-conditional (joint-distribution) test harnesses: alternating
// data simulation and one MCMC kernel application must leave the prior
// marginals of the parameters invariant.

#include <algorithm>
#include <vector>

#include "factorsv/gibbs.hpp"
#include "factorsv/samplers.hpp"
#include "factorsv/sv_univariate.hpp"
#include "support/stats.hpp"

namespace testsupport {

inline fsv::SvParams draw_sv_params_from_prior(fsv::Rng& rng, const fsv::SvPriors& priors,
                                               bool has_level) {
  fsv::SvParams p;
  p.mu = has_level ? rng.normal(priors.b_mu, std::sqrt(priors.B_mu)) : 0.0;
  p.phi = 2.0 * fsv::sample_beta(rng, priors.a0, priors.b0) - 1.0;
  p.sigma = std::sqrt(fsv::sample_gamma(rng, 0.5, 0.5 / priors.B_sigma));
  return p;
}

inline fsv::Vector draw_sv_path_from_prior(fsv::Rng& rng, const fsv::SvParams& p, bool has_level,
                                           int T) {
  fsv::Vector states(T + 1);
  const double mu = has_level ? p.mu : 0.0;
  states[0] = mu + p.sigma / std::sqrt(1.0 - p.phi * p.phi) * rng.normal();
  for (int t = 1; t <= T; ++t)
    states[t] = mu + p.phi * (states[t - 1] - mu) + p.sigma * rng.normal();
  return states;
}

struct SvGewekeDraws {
  std::vector<double> mu, phi, sigma;
};

// Univariate SV block: simulate y | h, then update (h, theta) | y.
inline SvGewekeDraws sv_geweke_chain(std::uint64_t seed, int T, const fsv::SvPriors& priors,
                                     bool has_level, int cycles) {
  fsv::Rng data_rng(seed, 1001);
  fsv::Rng kernel_rng(seed, 1002);
  fsv::Rng init_rng(seed, 1003);

  fsv::SvBlock block;
  block.has_level = has_level;
  block.params = draw_sv_params_from_prior(init_rng, priors, has_level);
  block.states = draw_sv_path_from_prior(init_rng, block.params, has_level, T);

  fsv::SvUpdateWorkspace ws;
  fsv::Vector y(T);
  SvGewekeDraws out;
  out.mu.reserve(cycles);
  out.phi.reserve(cycles);
  out.sigma.reserve(cycles);
  for (int c = 0; c < cycles; ++c) {
    for (int t = 0; t < T; ++t)
      y[t] = std::exp(0.5 * block.states[t + 1]) * data_rng.normal();
    fsv::sv_update(kernel_rng, y, block, priors, ws);
    out.mu.push_back(block.params.mu);
    out.phi.push_back(block.params.phi);
    out.sigma.push_back(block.params.sigma);
  }
  return out;
}

// Exact prior reference draws for the same parameters.
inline SvGewekeDraws sv_prior_reference(std::uint64_t seed, const fsv::SvPriors& priors,
                                        bool has_level, int n) {
  fsv::Rng rng(seed, 1004);
  SvGewekeDraws out;
  for (int k = 0; k < n; ++k) {
    const fsv::SvParams p = draw_sv_params_from_prior(rng, priors, has_level);
    out.mu.push_back(p.mu);
    out.phi.push_back(p.phi);
    out.sigma.push_back(p.sigma);
  }
  return out;
}

// Largest probability-scale gap between the chain's empirical CDF and exact
// prior quantiles, over a grid of quantile levels.
inline double max_quantile_gap(std::vector<double> chain, std::vector<double> prior,
                               const std::vector<double>& probs) {
  std::sort(chain.begin(), chain.end());
  std::sort(prior.begin(), prior.end());
  double worst = 0.0;
  for (double p : probs) {
    const double q = quantile_of(prior, p);
    worst = std::max(worst, std::abs(ecdf_at(chain, q) - p));
  }
  return worst;
}

// Full-model state drawn from the prior (row-wise or column-wise shrinkage,
// or the fixed Gaussian prior).
inline fsv::LatentState draw_state_from_prior(fsv::Rng& rng, int m, int T,
                                              const fsv::ChainConfig& cfg) {
  using fsv::LoadingsPriorVariant;
  const int r = cfg.r;
  fsv::LatentState s;
  s.loadings.restricted = cfg.restricted_loadings;
  s.loadings.entries = fsv::Matrix::Zero(m, r);
  const auto& lp = cfg.loadings_prior;
  s.shrinkage.tau2 = fsv::Matrix::Constant(
      m, r, lp.variant == LoadingsPriorVariant::fixed_gaussian ? lp.tau2_fixed : 1.0);
  if (lp.variant == LoadingsPriorVariant::normal_gamma_rowwise) {
    s.shrinkage.lambda2.resize(m);
    for (int i = 0; i < m; ++i) {
      s.shrinkage.lambda2[i] = fsv::sample_gamma(rng, lp.c, lp.d);
      for (int j = 0; j < s.loadings.active_cols(i); ++j)
        s.shrinkage.tau2(i, j) =
            fsv::sample_gamma(rng, lp.a, 0.5 * lp.a * s.shrinkage.lambda2[i]);
    }
  } else if (lp.variant == LoadingsPriorVariant::normal_gamma_columnwise) {
    s.shrinkage.lambda2.resize(r);
    for (int j = 0; j < r; ++j) {
      s.shrinkage.lambda2[j] = fsv::sample_gamma(rng, lp.c, lp.d);
      const int first = cfg.restricted_loadings ? std::min(j, m) : 0;
      for (int i = first; i < m; ++i)
        s.shrinkage.tau2(i, j) =
            fsv::sample_gamma(rng, lp.a, 0.5 * lp.a * s.shrinkage.lambda2[j]);
    }
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < s.loadings.active_cols(i); ++j)
      s.loadings.entries(i, j) = rng.normal(0.0, std::sqrt(s.shrinkage.tau2(i, j)));

  s.theta_idio.resize(m);
  s.theta_factor.resize(r);
  s.h.idio.resize(m, T + 1);
  s.h.factor.resize(r, T + 1);
  for (int i = 0; i < m; ++i) {
    s.theta_idio[i] = draw_sv_params_from_prior(rng, cfg.sv_priors_idio, true);
    s.h.idio.row(i) = draw_sv_path_from_prior(rng, s.theta_idio[i], true, T).transpose();
  }
  for (int j = 0; j < r; ++j) {
    s.theta_factor[j] = draw_sv_params_from_prior(rng, cfg.sv_priors_factor, false);
    s.h.factor.row(j) = draw_sv_path_from_prior(rng, s.theta_factor[j], false, T).transpose();
  }
  s.factors.resize(r, T);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < r; ++j)
      s.factors(j, t) = std::exp(0.5 * s.h.factor(j, t + 1)) * rng.normal();
  return s;
}

// y_t | Lambda, f_t, h_t from the observation equation.
inline void simulate_panel_given_state(fsv::Rng& rng, const fsv::LatentState& s,
                                       fsv::ReturnsPanel& panel) {
  const int m = s.loadings.m();
  const int T = static_cast<int>(s.factors.cols());
  if (panel.values.rows() != m || panel.values.cols() != T) panel.values.resize(m, T);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < m; ++i) {
      double y = std::exp(0.5 * s.h.idio(i, t + 1)) * rng.normal();
      if (s.loadings.r() > 0) y += s.loadings.entries.row(i).dot(s.factors.col(t));
      panel.values(i, t) = y;
    }
}

}  // namespace testsupport
