#include "factorsv/baselines.hpp"

#include <cmath>
#include <limits>

#include "factorsv/detail/linalg.hpp"
#include "factorsv/predict.hpp"

namespace fsv {

Matrix ma_covariance(const ReturnsPanel& data, int window, int t) {
  detail::require(window >= 1, "ma_covariance: window must be >= 1");
  detail::require(t >= window && t <= data.T(), "ma_covariance: need window <= t <= T");
  const int m = data.m();
  Matrix sigma = Matrix::Zero(m, m);
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(data.values.middleCols(t - window, window),
                                                   1.0 / window);
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  return sigma;
}

Matrix ewma_covariance(const ReturnsPanel& data, double alpha, int t,
                       const Eigen::Ref<const Matrix>& sigma_init) {
  if (!(alpha >= 0.0) || !(alpha < 1.0))
    throw domain_error("ewma_covariance: alpha must lie in [0, 1)");
  detail::require(t >= 1 && t <= data.T(), "ewma_covariance: need 1 <= t <= T");
  const int m = data.m();
  detail::require(sigma_init.rows() == m && sigma_init.cols() == m,
                  "ewma_covariance: sigma_init dimension mismatch");
  Matrix sigma = sigma_init;
  for (int s = 0; s < t; ++s) {
    sigma *= alpha;
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(data.values.col(s), 1.0 - alpha);
    sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  }
  return sigma;
}

Matrix ledoit_wolf(const Eigen::Ref<const Matrix>& data_window) {
  const int m = static_cast<int>(data_window.rows());
  const int n = static_cast<int>(data_window.cols());
  detail::require(n >= 2, "ledoit_wolf: window length must be >= 2");
  if (data_window.cwiseAbs().maxCoeff() == 0.0)
    throw domain_error("ledoit_wolf: degenerate all-zero window");

  Matrix sample = Matrix::Zero(m, m);
  sample.selfadjointView<Eigen::Lower>().rankUpdate(data_window, 1.0 / n);
  sample.triangularView<Eigen::StrictlyUpper>() = sample.transpose();

  // target mu * I and distances under the normalized Frobenius inner product
  const double mu = sample.trace() / m;
  Matrix centered = sample;
  centered.diagonal().array() -= mu;
  const double d2 = centered.squaredNorm() / m;

  double b2_bar = 0.0;
  for (int s = 0; s < n; ++s) {
    // || y_s y_s' - S ||_F^2 / m without forming the outer product
    const auto y = data_window.col(s);
    const double y2 = y.squaredNorm();
    b2_bar += (y2 * y2 - 2.0 * y.dot(sample * y) + sample.squaredNorm()) / m;
  }
  b2_bar /= static_cast<double>(n) * n;
  const double b2 = std::min(b2_bar, d2);
  const double delta = (d2 > 0.0) ? b2 / d2 : 1.0;

  Matrix out = (1.0 - delta) * sample;
  out.diagonal().array() += delta * mu;
  return out;
}

Vector min_variance_weights(const Eigen::Ref<const Matrix>& sigma_hat) {
  const int m = static_cast<int>(sigma_hat.rows());
  detail::require(sigma_hat.cols() == m && m >= 1, "min_variance_weights: not square");
  Eigen::LLT<Matrix> llt(sigma_hat);
  if (llt.info() != Eigen::Success)
    throw domain_error("min_variance_weights: covariance is not positive definite");
  Vector w = llt.solve(Vector::Ones(m));
  const double total = w.sum();
  if (!(total != 0.0) || !std::isfinite(total))
    throw domain_error("min_variance_weights: degenerate solution");
  return w / total;
}

BacktestReport portfolio_backtest(const std::vector<Vector>& weight_series,
                                  const Eigen::Ref<const Matrix>& realized_returns,
                                  double trading_days_per_year) {
  const int n = static_cast<int>(realized_returns.cols());
  const int m = static_cast<int>(realized_returns.rows());
  detail::require(static_cast<int>(weight_series.size()) == n && n >= 2,
                  "portfolio_backtest: need one weight vector per date and n >= 2");
  BacktestReport rep;
  rep.daily_returns.reserve(n);
  rep.equal_weight_returns.reserve(n);
  for (int k = 0; k < n; ++k) {
    detail::require(weight_series[k].size() == m, "portfolio_backtest: weight length mismatch");
    rep.daily_returns.push_back(weight_series[k].dot(realized_returns.col(k)));
    rep.equal_weight_returns.push_back(realized_returns.col(k).mean());
  }
  double mean_p = 0.0, mean_e = 0.0;
  for (int k = 0; k < n; ++k) {
    mean_p += rep.daily_returns[k];
    mean_e += rep.equal_weight_returns[k];
  }
  mean_p /= n;
  mean_e /= n;
  double var = 0.0;
  for (double x : rep.daily_returns) var += (x - mean_p) * (x - mean_p);
  var /= (n - 1);
  rep.annualized_sd = std::sqrt(var * trading_days_per_year);
  rep.annualized_excess_return_vs_equal_weight = (mean_p - mean_e) * trading_days_per_year;
  if (rep.annualized_sd > 0.0) {
    rep.sharpe_ratio = rep.annualized_excess_return_vs_equal_weight / rep.annualized_sd;
    rep.sharpe_defined = true;
  } else {
    rep.sharpe_ratio = std::numeric_limits<double>::quiet_NaN();
    rep.sharpe_defined = false;
  }
  return rep;
}

CorrelationErrorReport correlation_errors(const std::vector<Matrix>& true_corr_series,
                                          const std::vector<Matrix>& estimated_corr_series,
                                          const CorrelationErrorReport* baseline) {
  detail::require(true_corr_series.size() == estimated_corr_series.size() &&
                      !true_corr_series.empty(),
                  "correlation_errors: series length mismatch");
  const int m = static_cast<int>(true_corr_series.front().rows());
  const auto n_t = true_corr_series.size();
  CorrelationErrorReport rep;
  rep.per_pair_rmse = Matrix::Zero(m, m);
  double sq_sum = 0.0, abs_sum = 0.0;
  long count = 0;
  for (size_t t = 0; t < n_t; ++t) {
    const Matrix& tr = true_corr_series[t];
    const Matrix& es = estimated_corr_series[t];
    detail::require(tr.rows() == m && tr.cols() == m && es.rows() == m && es.cols() == m,
                    "correlation_errors: shape mismatch at t=" + std::to_string(t));
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const double e = es(i, j) - tr(i, j);
        sq_sum += e * e;
        abs_sum += std::abs(e);
        rep.per_pair_rmse(i, j) += e * e;
        ++count;
      }
  }
  rep.rmse = std::sqrt(sq_sum / count);
  rep.mae = abs_sum / count;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      rep.per_pair_rmse(i, j) = std::sqrt(rep.per_pair_rmse(i, j) / static_cast<double>(n_t));
      rep.per_pair_rmse(j, i) = rep.per_pair_rmse(i, j);
    }
  if (baseline) {
    detail::require(baseline->per_pair_rmse.rows() == m,
                    "correlation_errors: baseline dimension mismatch");
    rep.per_series_geometric_relative.resize(m);
    for (int i = 0; i < m; ++i) {
      double log_sum = 0.0;
      int n_pairs = 0;
      for (int j = 0; j < m; ++j) {
        if (j == i) continue;
        const double denom = std::max(baseline->per_pair_rmse(i, j), 1e-15);
        const double num = std::max(rep.per_pair_rmse(i, j), 1e-15);
        log_sum += std::log(num / denom);
        ++n_pairs;
      }
      rep.per_series_geometric_relative[i] = std::exp(log_sum / n_pairs);
    }
  }
  return rep;
}

MinVarianceBacktest run_min_variance_backtest(const ReturnsPanel& data,
                                              const CovarianceForecaster& forecaster, int t_start,
                                              int t_end, double trading_days_per_year) {
  detail::require(static_cast<bool>(forecaster), "run_min_variance_backtest: no forecaster");
  detail::require(t_start >= 1 && t_start < t_end && t_end <= data.T(),
                  "run_min_variance_backtest: bad evaluation window");
  MinVarianceBacktest out;
  const int n = t_end - t_start;
  out.weights.reserve(n);
  out.plps.reserve(n);
  for (int t = t_start; t < t_end; ++t) {
    const Matrix sigma_hat = forecaster(data, t);
    out.weights.push_back(min_variance_weights(sigma_hat));
    out.plps.push_back(pseudo_lps(sigma_hat, data.values.col(t)));
  }
  out.report = portfolio_backtest(out.weights, data.values.middleCols(t_start, n),
                                  trading_days_per_year);
  double s = 0.0;
  for (double x : out.plps) s += x;
  out.mean_plps = s / out.plps.size();
  return out;
}

}  // namespace fsv
