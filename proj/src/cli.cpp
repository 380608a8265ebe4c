#include "factorsv/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "factorsv/baselines.hpp"
#include "factorsv/config.hpp"
#include "factorsv/io.hpp"
#include "factorsv/model_core.hpp"
#include "factorsv/predict.hpp"
#include "factorsv/simulate.hpp"

namespace fsv {

namespace {

namespace fs = std::filesystem;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw config_error("expected a comma-separated integer list, got '" + text + "'");
  return out;
}

std::vector<std::pair<int, int>> parse_pair_list(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos)
      throw config_error("expected pairs like 1-2,9-10, got '" + text + "'");
    out.emplace_back(std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1)));
  }
  return out;
}

// Chain options shared by `fit` and `predict`; flags override the config file.
struct ChainFlags {
  std::string config_path, prior_preset, fixed_factors_path;
  int factors = -1, draws = -1, burnin = -1, thin = -1, threads = -1;
  bool restricted = false;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "declarative config file (key = value sections)");
    cmd->add_option("--prior", prior_preset,
                    "loadings prior preset: gaussian, lasso-row, lasso-col, ng-row, ng-col");
    cmd->add_option("--factors", factors, "number of latent factors r");
    cmd->add_option("--draws", draws, "MCMC iterations");
    cmd->add_option("--burnin", burnin, "burn-in iterations to discard");
    cmd->add_option("--thin", thin, "keep every thin-th post-burn-in draw");
    cmd->add_flag("--restricted", restricted, "pin loadings above the diagonal to zero");
    cmd->add_option("--fixed-factors", fixed_factors_path,
                    "CSV of observed factors (r x T); skips the factor draw");
    cmd->add_option("--seed", [this](const CLI::results_t& res) {
      seed = std::stoull(res.at(0));
      return true;
    }, "master RNG seed")->expected(1);
    cmd->add_option("--threads", threads, "within-chain worker threads");
  }

  ChainConfig resolve() const {
    ChainConfig cfg;
    if (!config_path.empty()) cfg = chain_config_from(Config::parse_file(config_path));
    if (!prior_preset.empty()) cfg.loadings_prior = loadings_prior_preset(prior_preset);
    if (factors >= 0) cfg.r = factors;
    if (draws >= 0) cfg.n_draws = draws;
    if (burnin >= 0) cfg.burn_in = burnin;
    if (thin >= 0) cfg.thin = thin;
    if (threads >= 0) cfg.threads = threads;
    if (restricted) cfg.restricted_loadings = true;
    if (seed) cfg.seed = *seed;
    if (!fixed_factors_path.empty()) cfg.fixed_factors = read_matrix_csv(fixed_factors_path);
    return cfg;
  }
};

void echo_config(const ChainConfig& cfg, const std::string& out_dir) {
  const std::string text = render_chain_config(cfg);
  std::cout << "# resolved configuration\n" << text;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "resolved_config.txt");
    f << text;
  }
}

// Posterior-mean correlation matrices, one per time point.
std::vector<Matrix> posterior_mean_correlations(const DrawStore& store) {
  const int T = store.T, m = store.m;
  std::vector<Matrix> mean(T, Matrix::Zero(m, m));
  for (const auto& snap : store.snapshots)
    for (int t = 0; t < T; ++t) {
      const Matrix cov =
          covariance_at(snap.loadings, snap.h.factor.col(t + 1), snap.h.idio.col(t + 1)).sigma;
      mean[t] += correlation_from_covariance(cov);
    }
  for (auto& mt : mean) mt /= static_cast<double>(store.snapshots.size());
  return mean;
}

int cmd_simulate(const SimSpec& spec, const std::string& out_dir) {
  GroundTruth truth = simulate_fsv(spec);
  fs::create_directories(out_dir);
  write_returns_csv(truth.data, (fs::path(out_dir) / "returns.csv").string());
  save_ground_truth(truth, (fs::path(out_dir) / "truth").string());
  std::cout << "# simulate: m = " << spec.m << ", T = " << spec.T << ", r = " << spec.r_true
            << ", seed = " << spec.seed << ", zero_fraction = " << spec.zero_fraction
            << ", restricted = " << spec.restricted << "\n";
  std::cout << "wrote " << out_dir << "/returns.csv and " << out_dir << "/truth/\n";
  return 0;
}

int cmd_fit(const std::string& data_path, bool demean, const ChainFlags& flags,
            const std::string& out_dir) {
  const ReturnsPanel panel = load_returns_csv(data_path, demean);
  ChainConfig cfg = flags.resolve();
  cfg.validate(panel.m(), panel.T());
  echo_config(cfg, out_dir);
  std::cout << "# data: m = " << panel.m() << ", T = " << panel.T()
            << ", fingerprint = " << panel_fingerprint(panel) << "\n";
  DrawStore store = run_chain(panel, cfg);
  save_drawstore(store, out_dir);
  std::cout << "kept " << store.snapshots.size() << " snapshots; store fingerprint = "
            << drawstore_fingerprint(store) << "\n";
  return 0;
}

int cmd_predict_rolling(const std::string& data_path, bool demean, const ChainFlags& flags,
                        int train_end, int eval_end, const std::string& horizons_text,
                        int workers, const std::string& method, bool emit_cov,
                        const std::string& out_dir) {
  const ReturnsPanel panel = load_returns_csv(data_path, demean);
  ChainConfig cfg = flags.resolve();
  RollingOptions opts;
  opts.horizons = parse_int_list(horizons_text);
  opts.workers = workers;
  if (method == "conditional")
    opts.conditional = true;
  else if (method != "marginal")
    throw config_error("--method must be marginal or conditional");
  opts.keep_cov_forecasts = emit_cov;
  echo_config(cfg, out_dir);
  const RollingResult res = rolling_forecast(panel, cfg, train_end, eval_end, opts);
  for (const auto& [h, series] : res.pl)
    write_pl_series_csv(series, (fs::path(out_dir) / ("pl_h" + std::to_string(h) + ".csv")).string());
  {
    std::ofstream f(fs::path(out_dir) / "failed_origins.csv");
    f << "origin\n";
    for (int t : res.failed_origins) f << t << '\n';
  }
  if (emit_cov) {
    const fs::path cov_dir = fs::path(out_dir) / "cov";
    fs::create_directories(cov_dir);
    std::size_t k = 0;
    for (int t : res.origins) {
      if (std::find(res.failed_origins.begin(), res.failed_origins.end(), t) !=
          res.failed_origins.end())
        continue;
      write_matrix_csv(res.cov_forecasts[k++],
                       (cov_dir / ("sigma_t" + std::to_string(t) + ".csv")).string());
    }
  }
  std::cout << "evaluated " << res.origins.size() - res.failed_origins.size() << " origins ("
            << res.failed_origins.size() << " failed)\n";
  return 0;
}

int cmd_predict_bf(const std::string& pl_a, const std::string& pl_b, int t1, int t2,
                   const std::string& out_path) {
  const PlSeries a = read_pl_series_csv(pl_a);
  const PlSeries b = read_pl_series_csv(pl_b);
  const auto bf = cumulative_log_bayes_factor(a, b, t1, t2);
  std::ofstream f(out_path);
  if (!f) throw parse_error("cannot open " + out_path + " for writing");
  f << "date,cumulative_log_bf\n";
  for (const auto& [d, v] : bf) f << d << ',' << format_double(v) << '\n';
  std::cout << "final cumulative log BF = " << bf.back().second << "\n";
  return 0;
}

int cmd_backtest(const std::string& data_path, bool demean, const std::string& method, int window,
                 double alpha, int t_start, int t_end, const std::string& cov_dir,
                 double annualization, const std::string& out_dir) {
  const ReturnsPanel panel = load_returns_csv(data_path, demean);
  CovarianceForecaster forecaster;
  if (method == "ma") {
    forecaster = [window](const ReturnsPanel& d, int t) { return ma_covariance(d, window, t); };
  } else if (method == "ewma") {
    forecaster = [window, alpha](const ReturnsPanel& d, int t) {
      const int w = std::min(window, t);
      Matrix sigma = ma_covariance(d, w, w);
      for (int s = w; s < t; ++s) {
        sigma *= alpha;
        sigma.selfadjointView<Eigen::Lower>().rankUpdate(d.values.col(s), 1.0 - alpha);
        sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
      }
      return sigma;
    };
  } else if (method == "lw") {
    forecaster = [window](const ReturnsPanel& d, int t) {
      const int w = std::min(window, t);
      return ledoit_wolf(d.values.middleCols(t - w, w));
    };
  } else if (method == "model") {
    if (cov_dir.empty()) throw config_error("--method model needs --cov-dir");
    forecaster = [cov_dir](const ReturnsPanel&, int t) {
      return read_matrix_csv((fs::path(cov_dir) / ("sigma_t" + std::to_string(t) + ".csv")).string());
    };
  } else {
    throw config_error("--method must be one of ma, ewma, lw, model");
  }
  const MinVarianceBacktest bt =
      run_min_variance_backtest(panel, forecaster, t_start, t_end, annualization);
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "report.csv");
    f << "method,annualized_sd,annualized_excess_return,sharpe_ratio,mean_plps\n";
    f << method << ',' << format_double(bt.report.annualized_sd) << ','
      << format_double(bt.report.annualized_excess_return_vs_equal_weight) << ','
      << (bt.report.sharpe_defined ? format_double(bt.report.sharpe_ratio) : "missing") << ','
      << format_double(bt.mean_plps) << '\n';
  }
  {
    std::ofstream f(fs::path(out_dir) / "daily_returns.csv");
    f << "date,portfolio,equal_weight,plps\n";
    for (std::size_t k = 0; k < bt.report.daily_returns.size(); ++k)
      f << t_start + static_cast<int>(k) << ',' << format_double(bt.report.daily_returns[k]) << ','
        << format_double(bt.report.equal_weight_returns[k]) << ',' << format_double(bt.plps[k])
        << '\n';
  }
  std::cout << "backtest " << method << ": sd = " << bt.report.annualized_sd
            << ", excess = " << bt.report.annualized_excess_return_vs_equal_weight
            << ", sharpe = " << (bt.report.sharpe_defined ? std::to_string(bt.report.sharpe_ratio)
                                                          : std::string("missing"))
            << ", plps = " << bt.mean_plps << "\n";
  return 0;
}

int cmd_evaluate(const std::string& truth_dir, const std::string& store_dir,
                 const std::string& baseline_store_dir, const std::string& out_dir) {
  const GroundTruth truth = load_ground_truth(truth_dir);
  const DrawStore store = load_drawstore(store_dir);
  detail::require(store.m == truth.data.m() && store.T == truth.data.T(),
                  "evaluate: store and truth shapes do not match");
  const std::vector<Matrix> truth_corr = true_correlation_series(truth);
  const std::vector<Matrix> est_corr = posterior_mean_correlations(store);

  CorrelationErrorReport baseline;
  const CorrelationErrorReport* baseline_ptr = nullptr;
  if (!baseline_store_dir.empty()) {
    const DrawStore base_store = load_drawstore(baseline_store_dir);
    baseline = correlation_errors(truth_corr, posterior_mean_correlations(base_store));
    baseline_ptr = &baseline;
  }
  const CorrelationErrorReport rep = correlation_errors(truth_corr, est_corr, baseline_ptr);

  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "correlation_report.csv");
    f << "rmse,mae\n" << format_double(rep.rmse) << ',' << format_double(rep.mae) << '\n';
  }
  write_matrix_csv(rep.per_pair_rmse, (fs::path(out_dir) / "per_pair_rmse.csv").string());
  if (baseline_ptr) {
    std::ofstream f(fs::path(out_dir) / "per_series_relative.csv");
    f << "series,geometric_relative_rmse\n";
    for (int i = 0; i < rep.per_series_geometric_relative.size(); ++i)
      f << i + 1 << ',' << format_double(rep.per_series_geometric_relative[i]) << '\n';
  }
  {
    std::ofstream f(fs::path(out_dir) / "communalities.csv");
    f << "date,mean,sd\n";
    const int T = store.T;
    for (int t = 0; t < T; ++t) {
      double s = 0.0, s2 = 0.0;
      for (const auto& snap : store.snapshots) {
        const double c =
            communalities(snap.loadings, snap.h.factor.col(t + 1), snap.h.idio.col(t + 1)).second;
        s += c;
        s2 += c * c;
      }
      const double n = static_cast<double>(store.snapshots.size());
      const double mean = s / n;
      f << t + 1 << ',' << format_double(mean) << ','
        << format_double(std::sqrt(std::max(0.0, s2 / n - mean * mean))) << '\n';
    }
  }
  std::cout << "correlation rmse = " << rep.rmse << ", mae = " << rep.mae << "\n";
  return 0;
}

int cmd_plotdata(const std::string& store_dir, const std::string& times_text,
                 const std::string& pairs_text, const std::string& out_dir) {
  const DrawStore store = load_drawstore(store_dir);
  fs::create_directories(out_dir);
  const int m = store.m, r = store.config.r, T = store.T;
  const auto n = store.snapshots.size();

  {
    std::ofstream f(fs::path(out_dir) / "loadings_draws.csv");
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < r; ++j) f << (i + j ? "," : "") << "L" << i + 1 << "_" << j + 1;
    f << '\n';
    for (const auto& snap : store.snapshots) {
      bool first = true;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < r; ++j) {
          f << (first ? "" : ",") << format_double(snap.loadings.entries(i, j));
          first = false;
        }
      f << '\n';
    }
  }

  auto write_logvar = [&](const std::string& name, bool factor_block, int count) {
    std::ofstream fm(fs::path(out_dir) / (name + "_mean.csv"));
    std::ofstream fsd(fs::path(out_dir) / (name + "_sd.csv"));
    for (int t = 0; t <= T; ++t) {
      for (int b = 0; b < count; ++b) {
        double s = 0.0, s2 = 0.0;
        for (const auto& snap : store.snapshots) {
          const double v = factor_block ? snap.h.factor(b, t) : snap.h.idio(b, t);
          s += v;
          s2 += v * v;
        }
        const double mean = s / n;
        fm << (b ? "," : "") << format_double(mean);
        fsd << (b ? "," : "")
            << format_double(std::sqrt(std::max(0.0, s2 / n - mean * mean)));
      }
      fm << '\n';
      fsd << '\n';
    }
  };
  write_logvar("logvar_idio", false, m);
  if (r > 0) write_logvar("logvar_factor", true, r);

  if (!times_text.empty()) {
    for (int t1 : parse_int_list(times_text)) {
      detail::require(t1 >= 1 && t1 <= T, "plotdata: --times entries must lie in [1, T]");
      Matrix mean = Matrix::Zero(m, m);
      for (const auto& snap : store.snapshots)
        mean += correlation_from_covariance(
            covariance_at(snap.loadings, snap.h.factor.col(t1), snap.h.idio.col(t1)).sigma);
      mean /= static_cast<double>(n);
      write_matrix_csv(mean, (fs::path(out_dir) / ("corr_t" + std::to_string(t1) + ".csv")).string());
    }
  }

  if (!pairs_text.empty()) {
    for (const auto& [pi, pj] : parse_pair_list(pairs_text)) {
      detail::require(pi >= 1 && pi <= m && pj >= 1 && pj <= m && pi != pj,
                      "plotdata: bad --pairs entry");
      std::ofstream f(fs::path(out_dir) /
                      ("corrpath_" + std::to_string(pi) + "_" + std::to_string(pj) + ".csv"));
      f << "date,mean,sd\n";
      for (int t = 0; t < T; ++t) {
        double s = 0.0, s2 = 0.0;
        for (const auto& snap : store.snapshots) {
          const Matrix cov =
              covariance_at(snap.loadings, snap.h.factor.col(t + 1), snap.h.idio.col(t + 1)).sigma;
          const double c = cov(pi - 1, pj - 1) / std::sqrt(cov(pi - 1, pi - 1) * cov(pj - 1, pj - 1));
          s += c;
          s2 += c * c;
        }
        const double mean = s / n;
        f << t + 1 << ',' << format_double(mean) << ','
          << format_double(std::sqrt(std::max(0.0, s2 / n - mean * mean))) << '\n';
      }
    }
  }

  std::cout << "plot data written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Bayesian factor stochastic volatility: estimation, prediction, backtesting"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a synthetic panel from the model");
  SimSpec spec;
  std::string sim_out;
  sim->add_option("--m", spec.m, "number of series");
  sim->add_option("--T", spec.T, "number of days");
  sim->add_option("--factors", spec.r_true, "number of factors");
  sim->add_option("--zero-fraction", spec.zero_fraction, "fraction of loadings forced to zero");
  bool sim_unrestricted = false;
  sim->add_flag("--unrestricted", sim_unrestricted, "do not zero loadings above the diagonal");
  sim->add_option("--seed", spec.seed, "simulation seed");
  sim->add_option("--out", sim_out, "output directory")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "run the posterior sampler on a returns CSV");
  std::string fit_data, fit_out;
  bool fit_demean = false;
  ChainFlags fit_flags;
  fit->add_option("--data", fit_data, "returns CSV")->required();
  fit->add_flag("--demean", fit_demean, "demean each series before fitting");
  fit_flags.attach(fit);
  fit->add_option("--out", fit_out, "draw store output directory")->required();

  // predict
  auto* pred = app.add_subcommand("predict", "rolling predictive likelihoods / Bayes factors");
  std::string pred_data, pred_out, pred_horizons = "1", pred_method = "marginal";
  std::string pred_pl_a, pred_pl_b;
  bool pred_demean = false, pred_emit_cov = false;
  int pred_train_end = -1, pred_eval_end = -1, pred_workers = 1, pred_t1 = -1, pred_t2 = -1;
  ChainFlags pred_flags;
  pred->add_option("--data", pred_data, "returns CSV");
  pred->add_flag("--demean", pred_demean, "demean each series first");
  pred_flags.attach(pred);
  pred->add_option("--train-end", pred_train_end, "first forecast origin (training length)");
  pred->add_option("--eval-end", pred_eval_end, "one past the last forecast origin");
  pred->add_option("--horizons", pred_horizons, "comma-separated horizons, e.g. 1,10");
  pred->add_option("--workers", pred_workers, "parallel re-estimation workers");
  pred->add_option("--method", pred_method, "PL evaluator: marginal (default) or conditional");
  pred->add_flag("--emit-cov", pred_emit_cov, "write posterior-mean predictive covariances");
  pred->add_option("--pl-a", pred_pl_a, "Bayes factor mode: PL series of model A");
  pred->add_option("--pl-b", pred_pl_b, "Bayes factor mode: PL series of model B");
  pred->add_option("--t1", pred_t1, "Bayes factor window start (exclusive)");
  pred->add_option("--t2", pred_t2, "Bayes factor window end (inclusive)");
  pred->add_option("--out", pred_out, "output directory (or file in Bayes factor mode)")
      ->required();

  // backtest
  auto* bt = app.add_subcommand("backtest", "minimum-variance portfolio backtest");
  std::string bt_data, bt_method = "ma", bt_cov_dir, bt_out;
  bool bt_demean = false;
  int bt_window = 500, bt_start = -1, bt_end = -1;
  double bt_alpha = 0.97, bt_annualization = 252.0;
  bt->add_option("--data", bt_data, "returns CSV")->required();
  bt->add_flag("--demean", bt_demean, "demean each series first");
  bt->add_option("--method", bt_method, "forecast method: ma, ewma, lw, model");
  bt->add_option("--window", bt_window, "window length for ma / lw and the ewma start");
  bt->add_option("--alpha", bt_alpha, "ewma persistence in [0,1)");
  bt->add_option("--start", bt_start, "first evaluation date (count of observed days)")
      ->required();
  bt->add_option("--end", bt_end, "one past the last evaluation date")->required();
  bt->add_option("--cov-dir", bt_cov_dir, "directory of sigma_t<t>.csv forecasts (method=model)");
  bt->add_option("--annualization", bt_annualization, "trading days per year");
  bt->add_option("--out", bt_out, "output directory")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "correlation errors and communalities vs truth");
  std::string ev_truth, ev_store, ev_baseline, ev_out;
  ev->add_option("--truth", ev_truth, "truth directory from `simulate`")->required();
  ev->add_option("--store", ev_store, "draw store directory from `fit`")->required();
  ev->add_option("--baseline-store", ev_baseline, "baseline draw store for relative errors");
  ev->add_option("--out", ev_out, "output directory")->required();

  // plotdata
  auto* pd = app.add_subcommand("plotdata", "emit plot-ready projections of a draw store");
  std::string pd_store, pd_times, pd_pairs, pd_out;
  pd->add_option("--store", pd_store, "draw store directory")->required();
  pd->add_option("--times", pd_times, "comma-separated time points for correlation snapshots");
  pd->add_option("--pairs", pd_pairs, "series pairs for correlation paths, e.g. 1-2,9-10");
  pd->add_option("--out", pd_out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim->parsed()) {
      spec.restricted = !sim_unrestricted;
      return cmd_simulate(spec, sim_out);
    }
    if (fit->parsed()) return cmd_fit(fit_data, fit_demean, fit_flags, fit_out);
    if (pred->parsed()) {
      if (!pred_pl_a.empty() || !pred_pl_b.empty()) {
        detail::require(!pred_pl_a.empty() && !pred_pl_b.empty() && pred_t1 >= 0 && pred_t2 > pred_t1,
                        "Bayes factor mode needs --pl-a, --pl-b, --t1, --t2");
        return cmd_predict_bf(pred_pl_a, pred_pl_b, pred_t1, pred_t2, pred_out);
      }
      detail::require(!pred_data.empty() && pred_train_end > 0 && pred_eval_end > pred_train_end,
                      "rolling mode needs --data, --train-end, --eval-end");
      return cmd_predict_rolling(pred_data, pred_demean, pred_flags, pred_train_end, pred_eval_end,
                                 pred_horizons, pred_workers, pred_method, pred_emit_cov, pred_out);
    }
    if (bt->parsed())
      return cmd_backtest(bt_data, bt_demean, bt_method, bt_window, bt_alpha, bt_start, bt_end,
                          bt_cov_dir, bt_annualization, bt_out);
    if (ev->parsed()) return cmd_evaluate(ev_truth, ev_store, ev_baseline, ev_out);
    if (pd->parsed()) return cmd_plotdata(pd_store, pd_times, pd_pairs, pd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace fsv
