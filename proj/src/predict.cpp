#include "factorsv/predict.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "factorsv/model_core.hpp"

namespace fsv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr std::uint64_t kTagRollingChain = 8;
constexpr std::uint64_t kTagRollingPredict = 9;

double logsumexp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// AR(1) forward step for every process of the snapshot; draw order is
// idiosyncratic blocks, then factor blocks, per horizon step.
void step_paths(Rng& rng, const LatentState& snap, Vector& h_idio, Vector& h_factor) {
  const int m = static_cast<int>(h_idio.size());
  const int r = static_cast<int>(h_factor.size());
  for (int i = 0; i < m; ++i) {
    const SvParams& p = snap.theta_idio[i];
    h_idio[i] = p.mu + p.phi * (h_idio[i] - p.mu) + p.sigma * rng.normal();
  }
  for (int j = 0; j < r; ++j) {
    const SvParams& p = snap.theta_factor[j];
    h_factor[j] = p.phi * h_factor[j] + p.sigma * rng.normal();
  }
}

void check_snapshot_params(const LatentState& snap) {
  for (const auto& p : snap.theta_idio)
    detail::require(std::abs(p.phi) < 1.0 && p.sigma > 0.0,
                    "propagate_latents: snapshot violates the SV parameter invariant");
  for (const auto& p : snap.theta_factor)
    detail::require(std::abs(p.phi) < 1.0 && p.sigma > 0.0 && p.mu == 0.0,
                    "propagate_latents: snapshot violates the SV parameter invariant");
}

}  // namespace

PredictiveDraw propagate_latents(Rng& rng, const LatentState& snapshot, int horizon) {
  detail::require(horizon >= 1, "propagate_latents: horizon must be >= 1");
  check_snapshot_params(snapshot);
  PredictiveDraw out;
  const int T = static_cast<int>(snapshot.h.idio.cols()) - 1;
  out.h_idio_future = snapshot.h.idio.col(T);
  out.h_factor_future = snapshot.h.factor.col(T);
  for (int s = 0; s < horizon; ++s) step_paths(rng, snapshot, out.h_idio_future, out.h_factor_future);
  const int r = static_cast<int>(out.h_factor_future.size());
  out.f_future.resize(r);
  for (int j = 0; j < r; ++j)
    out.f_future[j] = std::exp(0.5 * clamp_log_variance(out.h_factor_future[j])) * rng.normal();
  out.loadings = &snapshot.loadings;
  return out;
}

std::vector<PredictiveDraw> predictive_draws(Rng& rng, const DrawStore& store, int horizon) {
  std::vector<PredictiveDraw> draws;
  draws.reserve(store.snapshots.size());
  for (const auto& snap : store.snapshots) draws.push_back(propagate_latents(rng, snap, horizon));
  return draws;
}

double predictive_likelihood_conditional(const std::vector<PredictiveDraw>& draws,
                                         const Eigen::Ref<const Vector>& y_obs) {
  detail::require(!draws.empty(), "predictive_likelihood_conditional: K == 0");
  const int m = static_cast<int>(y_obs.size());
  std::vector<double> logdens;
  logdens.reserve(draws.size());
  for (const auto& d : draws) {
    detail::require(d.loadings && d.f_future.size() == d.loadings->r(),
                    "predictive_likelihood_conditional: draw carries no factor values");
    double ld = 0.0;
    for (int i = 0; i < m; ++i) {
      const double mean = d.loadings->r() > 0 ? d.loadings->entries.row(i).dot(d.f_future) : 0.0;
      const double h = clamp_log_variance(d.h_idio_future[i]);
      const double e = y_obs[i] - mean;
      ld += -0.5 * (kLog2Pi + h + e * e * std::exp(-h));
    }
    logdens.push_back(ld);
  }
  return logsumexp(logdens) - std::log(static_cast<double>(logdens.size()));
}

double predictive_likelihood_marginal(const std::vector<PredictiveDraw>& draws,
                                      const Eigen::Ref<const Vector>& y_obs, int* n_failed) {
  detail::require(!draws.empty(), "predictive_likelihood_marginal: K == 0");
  std::vector<double> logdens;
  logdens.reserve(draws.size());
  int failed = 0;
  for (const auto& d : draws) {
    detail::require(d.loadings != nullptr, "predictive_likelihood_marginal: missing loadings");
    try {
      logdens.push_back(
          gaussian_logdensity_woodbury(*d.loadings, d.h_factor_future, d.h_idio_future, y_obs));
    } catch (const numerical_error&) {
      ++failed;
    }
  }
  if (n_failed) *n_failed = failed;
  if (failed > 0.001 * static_cast<double>(draws.size()) || logdens.empty())
    throw numerical_error("predictive_likelihood_marginal: " + std::to_string(failed) + " of " +
                          std::to_string(draws.size()) + " draws failed to evaluate");
  return logsumexp(logdens) - std::log(static_cast<double>(logdens.size()));
}

Vector draw_predictive_y(Rng& rng, const PredictiveDraw& draw) {
  detail::require(draw.loadings != nullptr, "draw_predictive_y: missing loadings");
  const int m = static_cast<int>(draw.h_idio_future.size());
  const int r = static_cast<int>(draw.h_factor_future.size());
  Vector y(m);
  Vector f(r);
  for (int j = 0; j < r; ++j)
    f[j] = std::exp(0.5 * clamp_log_variance(draw.h_factor_future[j])) * rng.normal();
  for (int i = 0; i < m; ++i)
    y[i] = std::exp(0.5 * clamp_log_variance(draw.h_idio_future[i])) * rng.normal();
  if (r > 0) y.noalias() += draw.loadings->entries * f;
  return y;
}

std::vector<std::pair<int, double>> cumulative_log_bayes_factor(const PlSeries& pl_a,
                                                                const PlSeries& pl_b, int t1,
                                                                int t2) {
  detail::require(t1 < t2, "cumulative_log_bayes_factor: need t1 < t2");
  auto in_window = [&](const std::pair<int, double>& e) { return e.first > t1 && e.first <= t2; };
  std::vector<std::pair<int, double>> a, b;
  for (const auto& e : pl_a.values)
    if (in_window(e)) a.push_back(e);
  for (const auto& e : pl_b.values)
    if (in_window(e)) b.push_back(e);
  detail::require(a.size() == b.size() && !a.empty(),
                  "cumulative_log_bayes_factor: series do not cover the same dates");
  std::vector<std::pair<int, double>> out;
  out.reserve(a.size());
  double run = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    detail::require(a[i].first == b[i].first,
                    "cumulative_log_bayes_factor: date mismatch at position " + std::to_string(i));
    run += a[i].second - b[i].second;
    out.emplace_back(a[i].first, run);
  }
  return out;
}

double pseudo_lps(const Eigen::Ref<const Matrix>& sigma_hat,
                  const Eigen::Ref<const Vector>& y_obs) {
  const int m = static_cast<int>(y_obs.size());
  detail::require(sigma_hat.rows() == m && sigma_hat.cols() == m, "pseudo_lps: dimension mismatch");
  Eigen::LLT<Matrix> llt(sigma_hat);
  if (llt.info() != Eigen::Success)
    throw domain_error("pseudo_lps: covariance estimate is not positive definite");
  const Matrix& L = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < m; ++i) logdet += 2.0 * std::log(L(i, i));
  Vector z = y_obs;
  llt.matrixL().solveInPlace(z);
  return -0.5 * (m * kLog2Pi + logdet + z.squaredNorm());
}

RollingResult rolling_forecast(const ReturnsPanel& data, const ChainConfig& cfg, int t_start,
                               int t_end, const RollingOptions& opts) {
  data.validate();
  detail::require(!opts.horizons.empty(), "rolling_forecast: no horizons requested");
  int max_h = 0;
  for (int h : opts.horizons) {
    detail::require(h >= 1, "rolling_forecast: horizons must be >= 1");
    max_h = std::max(max_h, h);
  }
  detail::require(t_start >= 2 && t_start < t_end, "rolling_forecast: need 2 <= t_start < t_end");
  detail::require(t_end - 1 + max_h <= data.T(),
                  "rolling_forecast: evaluation window runs past the end of the panel");
  detail::require(!opts.keep_cov_forecasts ||
                      std::find(opts.horizons.begin(), opts.horizons.end(), 1) !=
                          opts.horizons.end(),
                  "rolling_forecast: covariance forecasts need horizon 1");

  const int n_origins = t_end - t_start;
  struct OriginOut {
    bool failed = false;
    std::map<int, double> pl;  // horizon -> log PL
    Matrix cov;
  };
  std::vector<OriginOut> slots(n_origins);

  auto run_origin = [&](int idx) {
    const int t = t_start + idx;
    OriginOut& slot = slots[idx];
    try {
      ReturnsPanel train;
      train.values = data.values.leftCols(t);
      train.demeaned = false;  // expanding windows of demeaned data keep nonzero means
      ChainConfig sub = cfg;
      sub.threads = 1;
      sub.seed = detail::derive_stream_seed(cfg.seed,
                                            (kTagRollingChain << 48) | static_cast<std::uint64_t>(t));
      if (cfg.fixed_factors) sub.fixed_factors = cfg.fixed_factors->leftCols(t).eval();
      DrawStore store = run_chain(train, sub);
      Rng pred_rng(RngHandle{cfg.seed, (kTagRollingPredict << 48) | static_cast<std::uint64_t>(t)});
      // one path walk to the maximum horizon, capturing each requested horizon
      std::vector<int> sorted = opts.horizons;
      std::sort(sorted.begin(), sorted.end());
      sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
      std::vector<std::vector<PredictiveDraw>> by_horizon(sorted.size());
      for (const auto& snap : store.snapshots) {
        Vector h_idio = snap.h.idio.col(t);
        Vector h_factor = snap.h.factor.col(t);
        size_t next = 0;
        for (int s = 1; s <= max_h && next < sorted.size(); ++s) {
          step_paths(pred_rng, snap, h_idio, h_factor);
          if (s == sorted[next]) {
            PredictiveDraw d;
            d.h_idio_future = h_idio;
            d.h_factor_future = h_factor;
            const int r = static_cast<int>(h_factor.size());
            d.f_future.resize(r);
            for (int j = 0; j < r; ++j)
              d.f_future[j] = std::exp(0.5 * clamp_log_variance(h_factor[j])) * pred_rng.normal();
            d.loadings = &snap.loadings;
            by_horizon[next].push_back(std::move(d));
            ++next;
          }
        }
      }
      for (size_t k = 0; k < sorted.size(); ++k) {
        const int h = sorted[k];
        const Vector y = data.values.col(t + h - 1);
        slot.pl[h] = opts.conditional ? predictive_likelihood_conditional(by_horizon[k], y)
                                      : predictive_likelihood_marginal(by_horizon[k], y);
      }
      if (opts.keep_cov_forecasts) {
        const auto& one_step = by_horizon.front();
        Matrix acc = Matrix::Zero(data.m(), data.m());
        for (const auto& d : one_step)
          acc += covariance_at(*d.loadings, d.h_factor_future, d.h_idio_future).sigma;
        slot.cov = acc / static_cast<double>(one_step.size());
      }
    } catch (const std::exception&) {
      slot.failed = true;
    }
  };

  const int workers = std::max(1, opts.workers);
  if (workers == 1) {
    for (int idx = 0; idx < n_origins; ++idx) run_origin(idx);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next_idx{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const int idx = next_idx.fetch_add(1);
          if (idx >= n_origins) return;
          run_origin(idx);
        }
      });
    for (auto& th : pool) th.join();
  }

  RollingResult out;
  for (int idx = 0; idx < n_origins; ++idx) {
    const int t = t_start + idx;
    out.origins.push_back(t);
    if (slots[idx].failed) {
      out.failed_origins.push_back(t);
      continue;
    }
    for (const auto& [h, v] : slots[idx].pl) out.pl[h].values.emplace_back(t + h - 1, v);
    if (opts.keep_cov_forecasts) out.cov_forecasts.push_back(std::move(slots[idx].cov));
  }
  return out;
}

}  // namespace fsv
