#include "factorsv/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "factorsv/model_core.hpp"
#include "factorsv/rng.hpp"
#include "factorsv/sv_univariate.hpp"

namespace fsv {

namespace {

constexpr std::uint64_t kTagSimParams = 20;
constexpr std::uint64_t kTagSimLoadings = 21;
constexpr std::uint64_t kTagSimPaths = 22;
constexpr std::uint64_t kTagSimObs = 23;

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.u01(); }

}  // namespace

void SimSpec::validate() const {
  if (m < 1 || T < 2 || r_true < 0) throw config_error("SimSpec: need m >= 1, T >= 2, r >= 0");
  if (!(zero_fraction >= 0.0 && zero_fraction <= 1.0))
    throw config_error("SimSpec: zero_fraction must lie in [0, 1]");
  if (loadings_explicit &&
      (loadings_explicit->rows() != m || loadings_explicit->cols() != r_true))
    throw config_error("SimSpec: explicit loadings must be m x r");
  auto check_range = [](const SvParamRange& r, bool factor) {
    if (r.mu_min > r.mu_max || r.phi_min > r.phi_max || r.sigma_min > r.sigma_max)
      throw config_error("SimSpec: empty parameter range");
    if (!(std::abs(r.phi_min) < 1.0 && std::abs(r.phi_max) < 1.0))
      throw config_error("SimSpec: phi range must lie in (-1, 1)");
    if (!(r.sigma_min > 0.0)) throw config_error("SimSpec: sigma range must be positive");
    if (factor && (r.mu_min != 0.0 || r.mu_max != 0.0))
      throw config_error("SimSpec: factor mu range must be {0}");
  };
  check_range(idio_range, false);
  check_range(factor_range, true);
}

GroundTruth simulate_fsv(const SimSpec& spec) {
  spec.validate();
  const int m = spec.m, T = spec.T, r = spec.r_true;
  GroundTruth truth;

  Rng param_rng(spec.seed, kTagSimParams);
  truth.theta_idio.resize(m);
  for (int i = 0; i < m; ++i)
    truth.theta_idio[i] =
        SvParams{uniform_in(param_rng, spec.idio_range.mu_min, spec.idio_range.mu_max),
                 uniform_in(param_rng, spec.idio_range.phi_min, spec.idio_range.phi_max),
                 uniform_in(param_rng, spec.idio_range.sigma_min, spec.idio_range.sigma_max)};
  truth.theta_factor.resize(r);
  for (int j = 0; j < r; ++j)
    truth.theta_factor[j] =
        SvParams{0.0, uniform_in(param_rng, spec.factor_range.phi_min, spec.factor_range.phi_max),
                 uniform_in(param_rng, spec.factor_range.sigma_min, spec.factor_range.sigma_max)};

  truth.loadings.restricted = spec.restricted;
  if (spec.loadings_explicit) {
    truth.loadings.entries = *spec.loadings_explicit;
    if (spec.restricted)
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < r; ++j) truth.loadings.entries(i, j) = 0.0;
  } else {
    Rng load_rng(spec.seed, kTagSimLoadings);
    truth.loadings.entries = Matrix::Zero(m, r);
    std::vector<std::pair<int, int>> active;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < r; ++j)
        if (!spec.restricted || j <= i) {
          truth.loadings.entries(i, j) = load_rng.normal();
          active.emplace_back(i, j);
        }
    const int n_zero = static_cast<int>(std::llround(spec.zero_fraction * active.size()));
    // seeded partial Fisher-Yates selects exactly n_zero cells
    for (int k = 0; k < n_zero && k < static_cast<int>(active.size()); ++k) {
      const int pick = k + static_cast<int>(load_rng.next_u64() % (active.size() - k));
      std::swap(active[k], active[pick]);
      truth.loadings.entries(active[k].first, active[k].second) = 0.0;
    }
  }

  Rng path_rng(spec.seed, kTagSimPaths);
  truth.h.idio.resize(m, T + 1);
  for (int i = 0; i < m; ++i) {
    const SvParams& p = truth.theta_idio[i];
    truth.h.idio(i, 0) = p.mu + p.sigma / std::sqrt(1.0 - p.phi * p.phi) * path_rng.normal();
    for (int t = 1; t <= T; ++t)
      truth.h.idio(i, t) =
          p.mu + p.phi * (truth.h.idio(i, t - 1) - p.mu) + p.sigma * path_rng.normal();
  }
  truth.h.factor.resize(r, T + 1);
  for (int j = 0; j < r; ++j) {
    const SvParams& p = truth.theta_factor[j];
    truth.h.factor(j, 0) = p.sigma / std::sqrt(1.0 - p.phi * p.phi) * path_rng.normal();
    for (int t = 1; t <= T; ++t)
      truth.h.factor(j, t) = p.phi * truth.h.factor(j, t - 1) + p.sigma * path_rng.normal();
  }

  Rng obs_rng(spec.seed, kTagSimObs);
  truth.factors.resize(r, T);
  truth.data.values.resize(m, T);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < r; ++j)
      truth.factors(j, t) =
          std::exp(0.5 * clamp_log_variance(truth.h.factor(j, t + 1))) * obs_rng.normal();
    for (int i = 0; i < m; ++i) {
      double y = std::exp(0.5 * clamp_log_variance(truth.h.idio(i, t + 1))) * obs_rng.normal();
      if (r > 0) y += truth.loadings.entries.row(i).dot(truth.factors.col(t));
      truth.data.values(i, t) = y;
    }
  }
  truth.data.series_labels.resize(m);
  truth.data.date_labels.resize(T);
  for (int i = 0; i < m; ++i) truth.data.series_labels[i] = "S" + std::to_string(i + 1);
  for (int t = 0; t < T; ++t) truth.data.date_labels[t] = std::to_string(t + 1);
  truth.data.demeaned = false;
  return truth;
}

Matrix true_covariance_at(const GroundTruth& truth, int t) {
  detail::require(t >= 0 && t < truth.data.T(), "true_covariance_at: t out of range");
  return covariance_at(truth.loadings, truth.h.factor.col(t + 1), truth.h.idio.col(t + 1)).sigma;
}

std::vector<Matrix> true_correlation_series(const GroundTruth& truth) {
  const int T = truth.data.T();
  std::vector<Matrix> out;
  out.reserve(T);
  for (int t = 0; t < T; ++t)
    out.push_back(correlation_from_covariance(true_covariance_at(truth, t)));
  return out;
}

}  // namespace fsv
