#pragma once

#include <functional>
#include <vector>

#include "factorsv/types.hpp"

namespace fsv {

struct BacktestReport {
  double annualized_sd = 0.0;
  double annualized_excess_return_vs_equal_weight = 0.0;
  double sharpe_ratio = 0.0;
  bool sharpe_defined = false;
  std::vector<double> daily_returns;
  std::vector<double> equal_weight_returns;
};

struct CorrelationErrorReport {
  double rmse = 0.0;
  double mae = 0.0;
  Matrix per_pair_rmse;                   // m x m symmetric, time-averaged per pair
  Vector per_series_geometric_relative;   // vs a baseline report; empty otherwise
};

// Zero-mean sample covariance (divisor = window) of columns [t-window, t).
// `t` counts the days observed so far.
Matrix ma_covariance(const ReturnsPanel& data, int window, int t);

// Sigma_{s+1} = (1-alpha) y_s y_s' + alpha Sigma_s iterated over columns
// [0, t); returns the forecast for day t+1. alpha in [0, 1).
Matrix ewma_covariance(const ReturnsPanel& data, double alpha, int t,
                       const Eigen::Ref<const Matrix>& sigma_init);

// Shrinkage of the zero-mean sample covariance toward the scaled identity with
// the data-driven optimal intensity; positive definite even for short windows.
Matrix ledoit_wolf(const Eigen::Ref<const Matrix>& data_window);

// omega = Sigma^{-1} 1 / (1' Sigma^{-1} 1); short positions allowed.
Vector min_variance_weights(const Eigen::Ref<const Matrix>& sigma_hat);

BacktestReport portfolio_backtest(const std::vector<Vector>& weight_series,
                                  const Eigen::Ref<const Matrix>& realized_returns,
                                  double trading_days_per_year = 252.0);

CorrelationErrorReport correlation_errors(const std::vector<Matrix>& true_corr_series,
                                          const std::vector<Matrix>& estimated_corr_series,
                                          const CorrelationErrorReport* baseline = nullptr);

// Forecast provider: returns Sigma_hat for day t+1 using columns [0, t) only.
using CovarianceForecaster = std::function<Matrix(const ReturnsPanel&, int t)>;

// Minimum-variance backtest driver: weights at each date use the forecaster's
// output for that date; realized returns come from the held-out column.
struct MinVarianceBacktest {
  BacktestReport report;
  std::vector<Vector> weights;  // one per evaluated date
  std::vector<double> plps;     // pseudo log predictive score per date
  double mean_plps = 0.0;
};
MinVarianceBacktest run_min_variance_backtest(const ReturnsPanel& data,
                                              const CovarianceForecaster& forecaster, int t_start,
                                              int t_end, double trading_days_per_year = 252.0);

}  // namespace fsv
