#pragma once

#include <map>
#include <utility>
#include <vector>

#include "factorsv/gibbs.hpp"
#include "factorsv/types.hpp"

namespace fsv {

// Latent variables of one posterior draw propagated h steps past the sample
// end, plus the draw's loadings (referenced, not copied).
struct PredictiveDraw {
  Vector h_idio_future;    // length m
  Vector h_factor_future;  // length r
  Vector f_future;         // length r, drawn from N(0, V) at the terminal horizon
  const LoadingsMatrix* loadings = nullptr;
};

// Per-date log predictive likelihoods with strictly increasing date indices.
struct PlSeries {
  std::vector<std::pair<int, double>> values;
};

// Iterate the AR(1) laws forward `horizon` steps from the snapshot's terminal
// states, then draw the factor vector at the terminal horizon.
PredictiveDraw propagate_latents(Rng& rng, const LatentState& snapshot, int horizon);

// log (1/K) sum_k N(y; Lambda^k f^k, Sigma_bar^k): univariate evaluations only,
// unstable in high dimensions but cheap.
double predictive_likelihood_conditional(const std::vector<PredictiveDraw>& draws,
                                         const Eigen::Ref<const Vector>& y_obs);

// log (1/K) sum_k N(y; 0, Lambda^k V^k Lambda^k' + Sigma_bar^k) through the
// Woodbury identity and the determinant lemma; the recommended estimator.
// Draws whose evaluation fails numerically are dropped (counted in *n_failed);
// the evaluation errors if more than 0.1% of draws fail.
double predictive_likelihood_marginal(const std::vector<PredictiveDraw>& draws,
                                      const Eigen::Ref<const Vector>& y_obs,
                                      int* n_failed = nullptr);

// One draw y = Lambda f* + eps from the draw's predictive law.
Vector draw_predictive_y(Rng& rng, const PredictiveDraw& draw);

// Running sum of log PL_t(A) - log PL_t(B) over t in (t1, t2]; positive values
// favor model A.
std::vector<std::pair<int, double>> cumulative_log_bayes_factor(const PlSeries& pl_a,
                                                                const PlSeries& pl_b, int t1,
                                                                int t2);

// Gaussian plug-in approximation log N(y_obs; 0, sigma_hat).
double pseudo_lps(const Eigen::Ref<const Matrix>& sigma_hat,
                  const Eigen::Ref<const Vector>& y_obs);

struct RollingOptions {
  std::vector<int> horizons{1};
  int workers = 1;
  bool conditional = false;        // evaluate with the conditional method instead
  bool keep_cov_forecasts = false; // posterior mean one-step predictive covariances
};

struct RollingResult {
  std::map<int, PlSeries> pl;       // horizon -> series indexed by target date
  std::vector<int> origins;         // forecast origins t (train on columns [0, t))
  std::vector<int> failed_origins;  // origins whose re-estimation failed
  std::vector<Matrix> cov_forecasts;  // per successful origin, when requested
};

// Expanding-window out-of-sample race: for each origin t in [t_start, t_end),
// re-estimate on the first t columns and evaluate the predictive likelihood at
// the requested horizons. Deterministic for a fixed seed regardless of the
// worker count.
RollingResult rolling_forecast(const ReturnsPanel& data, const ChainConfig& cfg, int t_start,
                               int t_end, const RollingOptions& opts = {});

// Posterior draws propagated from a fitted store; building block shared by the
// rolling race and the bindings.
std::vector<PredictiveDraw> predictive_draws(Rng& rng, const DrawStore& store, int horizon);

}  // namespace fsv
