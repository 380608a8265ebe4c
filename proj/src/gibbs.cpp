#include "factorsv/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "factorsv/detail/fnv.hpp"
#include "factorsv/model_core.hpp"
#include "factorsv/samplers.hpp"

namespace fsv {

namespace {

enum StreamTag : std::uint64_t {
  kTagSvIdio = 1,
  kTagSvFactor = 2,
  kTagRow = 3,
  kTagTime = 4,
  kTagScaffold = 5,
  kTagInit = 6,
};

RngHandle site_handle(RngHandle base, StreamTag tag, std::uint64_t idx) {
  return RngHandle{base.seed, base.stream_id ^ ((static_cast<std::uint64_t>(tag) << 48) | idx)};
}

int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

// Per-site draw streams of one chain. Sites own their streams so that
// parallel and serial sweeps consume identical randomness.
struct Streams {
  std::vector<Rng> sv_idio, sv_factor, rows, times;
  Rng scaffold;

  Streams(RngHandle base, int m, int r, int T) : scaffold(site_handle(base, kTagScaffold, 0)) {
    sv_idio.reserve(m);
    for (int i = 0; i < m; ++i) sv_idio.emplace_back(site_handle(base, kTagSvIdio, i));
    sv_factor.reserve(r);
    for (int j = 0; j < r; ++j) sv_factor.emplace_back(site_handle(base, kTagSvFactor, j));
    rows.reserve(m);
    for (int i = 0; i < m; ++i) rows.emplace_back(site_handle(base, kTagRow, i));
    times.reserve(T);
    for (int t = 0; t < T; ++t) times.emplace_back(site_handle(base, kTagTime, t));
  }
};

struct RegressionWs {
  Matrix scaled, a, chol;
  Vector w, wy, rhs, psi;
};

struct ThreadWs {
  SvUpdateWorkspace sv;
  SvBlock block;
  Vector obs;
  RegressionWs reg;
};

// A = F diag(exp(-h)) F' + diag(psi), rhs = F (exp(-h) o y); draw written into ws.rhs.
void loadings_row_draw(Rng& rng, const Eigen::Ref<const Matrix>& factors_rt,
                       const Eigen::Ref<const Vector>& y_row,
                       const Eigen::Ref<const Vector>& h_row,
                       const Eigen::Ref<const Vector>& psi, RegressionWs& ws) {
  const int rt = static_cast<int>(factors_rt.rows());
  const int T = static_cast<int>(factors_rt.cols());
  ws.w.resize(T);
  ws.wy.resize(T);
  for (int t = 0; t < T; ++t) {
    ws.w[t] = std::exp(-clamp_log_variance(h_row[t]));
    ws.wy[t] = ws.w[t] * y_row[t];
  }
  ws.scaled.resize(rt, T);
  ws.scaled.noalias() = factors_rt * ws.w.asDiagonal();
  ws.a.resize(rt, rt);
  ws.a.noalias() = ws.scaled * factors_rt.transpose();
  ws.a.diagonal() += psi;
  ws.rhs.resize(rt);
  ws.rhs.noalias() = factors_rt * ws.wy;
  ws.chol.resize(rt, rt);
  detail::mvn_from_precision(rng, ws.a, ws.chol, ws.rhs);
}

// A = Lambda' diag(exp(-h_idio)) Lambda + diag(exp(-h_factor)),
// rhs = Lambda' (exp(-h_idio) o y); draw written into ws.rhs.
void factor_draw(Rng& rng, const LoadingsMatrix& loadings, const Eigen::Ref<const Vector>& y_t,
                 const Eigen::Ref<const Vector>& h_idio_t,
                 const Eigen::Ref<const Vector>& h_factor_t, RegressionWs& ws) {
  const int m = loadings.m(), r = loadings.r();
  ws.w.resize(m);
  ws.wy.resize(m);
  for (int i = 0; i < m; ++i) {
    ws.w[i] = std::exp(-clamp_log_variance(h_idio_t[i]));
    ws.wy[i] = ws.w[i] * y_t[i];
  }
  ws.scaled.resize(m, r);
  ws.scaled.noalias() = ws.w.asDiagonal() * loadings.entries;
  ws.a.resize(r, r);
  ws.a.noalias() = loadings.entries.transpose() * ws.scaled;
  for (int j = 0; j < r; ++j) ws.a(j, j) += std::exp(-clamp_log_variance(h_factor_t[j]));
  ws.rhs.resize(r);
  ws.rhs.noalias() = loadings.entries.transpose() * ws.wy;
  ws.chol.resize(r, r);
  detail::mvn_from_precision(rng, ws.a, ws.chol, ws.rhs);
}

struct SweepError {
  std::exception_ptr ptr = nullptr;
  // Call from inside a catch block; stores the first failure with its site id.
  void capture(const char* step, int site) {
    if (ptr) return;
    try {
      throw;
    } catch (const std::exception& e) {
      ptr = std::make_exception_ptr(numerical_error(std::string("gibbs_sweep: ") + step +
                                                    ", block " + std::to_string(site) + ": " +
                                                    e.what()));
    } catch (...) {
      ptr = std::current_exception();
    }
  }
  void rethrow_if_set() const {
    if (ptr) std::rethrow_exception(ptr);
  }
};

void sweep_impl(const ReturnsPanel& data, LatentState& s, const ChainConfig& cfg,
                Streams& streams, std::vector<ThreadWs>& tws, Matrix& resid,
                const DeepInterweavingMove& move) {
  const int m = data.m(), T = data.T(), r = cfg.r;
  const int nthreads = static_cast<int>(tws.size());
  const bool parallel = nthreads > 1;

  // step 1: m idiosyncratic SV updates on the residuals, r factor SV updates
  // on the factor paths
  resid = data.values;
  if (r > 0) resid.noalias() -= s.loadings.entries * s.factors;

  SweepError err;
#pragma omp parallel for schedule(static) num_threads(nthreads) if (parallel)
  for (int site = 0; site < m + r; ++site) {
    if (err.ptr) continue;
    ThreadWs& w = tws[thread_index()];
    try {
      if (site < m) {
        const int i = site;
        w.obs = resid.row(i).transpose();
        w.block.states = s.h.idio.row(i).transpose();
        w.block.params = s.theta_idio[i];
        w.block.has_level = true;
        sv_update(streams.sv_idio[i], w.obs, w.block, cfg.sv_priors_idio, w.sv);
        s.h.idio.row(i) = w.block.states.transpose();
        s.theta_idio[i] = w.block.params;
      } else {
        const int j = site - m;
        w.obs = s.factors.row(j).transpose();
        w.block.states = s.h.factor.row(j).transpose();
        w.block.params = s.theta_factor[j];
        w.block.has_level = false;
        sv_update(streams.sv_factor[j], w.obs, w.block, cfg.sv_priors_factor, w.sv);
        s.h.factor.row(j) = w.block.states.transpose();
        s.theta_factor[j] = w.block.params;
      }
    } catch (...) {
#pragma omp critical
      err.capture("step 1", site);
    }
  }
  err.rethrow_if_set();

  // step 2a/2b: shrinkage hierarchy (skipped for the fixed Gaussian prior)
  try {
    switch (cfg.loadings_prior.variant) {
      case LoadingsPriorVariant::fixed_gaussian:
        break;
      case LoadingsPriorVariant::normal_gamma_rowwise:
        update_shrinkage_rowwise(streams.scaffold, s.loadings, s.shrinkage, cfg.loadings_prior);
        break;
      case LoadingsPriorVariant::normal_gamma_columnwise:
        update_shrinkage_columnwise(streams.scaffold, s.loadings, s.shrinkage, cfg.loadings_prior);
        break;
    }
  } catch (const std::exception& e) {
    throw numerical_error(std::string("gibbs_sweep: step 2: ") + e.what());
  }

  // step 3: loadings rows
  if (r > 0) {
#pragma omp parallel for schedule(static) num_threads(nthreads) if (parallel)
    for (int i = 0; i < m; ++i) {
      if (err.ptr) continue;
      ThreadWs& w = tws[thread_index()];
      try {
        const int rt = s.loadings.active_cols(i);
        w.reg.psi.resize(rt);
        if (cfg.loadings_prior.variant == LoadingsPriorVariant::fixed_gaussian)
          w.reg.psi.setConstant(1.0 / cfg.loadings_prior.tau2_fixed);
        else
          for (int j = 0; j < rt; ++j) w.reg.psi[j] = 1.0 / s.shrinkage.tau2(i, j);
        loadings_row_draw(streams.rows[i], s.factors.topRows(rt), data.values.row(i).transpose(),
                          s.h.idio.row(i).segment(1, T).transpose(), w.reg.psi, w.reg);
        s.loadings.entries.row(i).head(rt) = w.reg.rhs.transpose();
      } catch (...) {
#pragma omp critical
        err.capture("step 3", i);
      }
    }
    err.rethrow_if_set();
  }

  // step 3*: optional boosting move
  deep_interweaving_hook(s, move);

  // step 4: factors per time point (skipped in fixed-factor mode)
  if (r > 0 && !cfg.fixed_factors) {
#pragma omp parallel for schedule(static) num_threads(nthreads) if (parallel)
    for (int t = 0; t < T; ++t) {
      if (err.ptr) continue;
      ThreadWs& w = tws[thread_index()];
      try {
        factor_draw(streams.times[t], s.loadings, data.values.col(t), s.h.idio.col(t + 1),
                    s.h.factor.col(t + 1), w.reg);
        s.factors.col(t) = w.reg.rhs;
      } catch (...) {
#pragma omp critical
        err.capture("step 4", t);
      }
    }
    err.rethrow_if_set();
  }
}

}  // namespace

const char* to_string(LoadingsPriorVariant v) {
  switch (v) {
    case LoadingsPriorVariant::fixed_gaussian:
      return "fixed_gaussian";
    case LoadingsPriorVariant::normal_gamma_rowwise:
      return "normal_gamma_rowwise";
    case LoadingsPriorVariant::normal_gamma_columnwise:
      return "normal_gamma_columnwise";
  }
  return "unknown";
}

LoadingsPriorVariant loadings_prior_variant_from_string(const std::string& name) {
  if (name == "fixed_gaussian") return LoadingsPriorVariant::fixed_gaussian;
  if (name == "normal_gamma_rowwise") return LoadingsPriorVariant::normal_gamma_rowwise;
  if (name == "normal_gamma_columnwise") return LoadingsPriorVariant::normal_gamma_columnwise;
  throw config_error("unknown loadings prior variant: " + name);
}

void LoadingsPriorConfig::validate() const {
  if (variant == LoadingsPriorVariant::fixed_gaussian) {
    if (!(tau2_fixed > 0.0)) throw config_error("loadings prior: tau2_fixed must be > 0");
  } else {
    if (!(a > 0.0) || !(c > 0.0) || !(d > 0.0))
      throw config_error("loadings prior: a, c, d must be > 0");
  }
}

void ChainConfig::validate(int m, int T) const {
  if (r < 0) throw config_error("chain: r must be >= 0");
  if (n_draws < 1) throw config_error("chain: n_draws must be >= 1");
  if (burn_in < 0 || burn_in >= n_draws) throw config_error("chain: need 0 <= burn_in < n_draws");
  if (thin < 1) throw config_error("chain: thin must be >= 1");
  if (threads < 1) throw config_error("chain: threads must be >= 1");
  if (fixed_factors &&
      (fixed_factors->rows() != r || fixed_factors->cols() != T))
    throw config_error("chain: fixed_factors must be r x T");
  (void)m;
  sv_priors_idio.validate();
  sv_priors_factor.validate();
  loadings_prior.validate();
}

std::pair<double, double> shrinkage_gamma_params_row(int i, const LoadingsMatrix& loadings,
                                                     const ShrinkageState& state,
                                                     const LoadingsPriorConfig& cfg) {
  const int rt = loadings.active_cols(i);
  double sum_tau2 = 0.0;
  for (int j = 0; j < rt; ++j) sum_tau2 += state.tau2(i, j);
  return {cfg.c + cfg.a * rt, cfg.d + 0.5 * cfg.a * sum_tau2};
}

std::pair<double, double> shrinkage_gamma_params_col(int j, const LoadingsMatrix& loadings,
                                                     const ShrinkageState& state,
                                                     const LoadingsPriorConfig& cfg) {
  const int m = loadings.m();
  const int first_row = loadings.restricted ? std::min(j, m) : 0;
  const int count = m - first_row;
  double sum_tau2 = 0.0;
  for (int i = first_row; i < m; ++i) sum_tau2 += state.tau2(i, j);
  return {cfg.c + cfg.a * count, cfg.d + 0.5 * cfg.a * sum_tau2};
}

void update_shrinkage_rowwise(Rng& rng, const LoadingsMatrix& loadings, ShrinkageState& state,
                              const LoadingsPriorConfig& cfg) {
  detail::require(cfg.variant == LoadingsPriorVariant::normal_gamma_rowwise,
                  "update_shrinkage_rowwise: wrong prior variant");
  const int m = loadings.m();
  detail::require(state.tau2.rows() == m && state.tau2.cols() == loadings.r() &&
                      state.lambda2.size() == m,
                  "update_shrinkage_rowwise: state dimension mismatch");
  for (int i = 0; i < m; ++i) {
    const auto [shape, rate] = shrinkage_gamma_params_row(i, loadings, state, cfg);
    state.lambda2[i] = sample_gamma(rng, shape, rate);
    const int rt = loadings.active_cols(i);
    for (int j = 0; j < rt; ++j) {
      const double lam = loadings.entries(i, j);
      state.tau2(i, j) = sample_gig(rng, cfg.a - 0.5, cfg.a * state.lambda2[i], lam * lam);
    }
  }
}

void update_shrinkage_columnwise(Rng& rng, const LoadingsMatrix& loadings, ShrinkageState& state,
                                 const LoadingsPriorConfig& cfg) {
  detail::require(cfg.variant == LoadingsPriorVariant::normal_gamma_columnwise,
                  "update_shrinkage_columnwise: wrong prior variant");
  const int m = loadings.m(), r = loadings.r();
  detail::require(state.tau2.rows() == m && state.tau2.cols() == r && state.lambda2.size() == r,
                  "update_shrinkage_columnwise: state dimension mismatch");
  for (int j = 0; j < r; ++j) {
    const auto [shape, rate] = shrinkage_gamma_params_col(j, loadings, state, cfg);
    state.lambda2[j] = sample_gamma(rng, shape, rate);
    const int first_row = loadings.restricted ? std::min(j, m) : 0;
    for (int i = first_row; i < m; ++i) {
      const double lam = loadings.entries(i, j);
      state.tau2(i, j) = sample_gig(rng, cfg.a - 0.5, cfg.a * state.lambda2[j], lam * lam);
    }
  }
}

Vector sample_loadings_row(Rng& rng, int i, const Eigen::Ref<const Matrix>& factors,
                           const Eigen::Ref<const Vector>& y_row,
                           const Eigen::Ref<const Vector>& h_row,
                           const Eigen::Ref<const Vector>& psi) {
  detail::require(i >= 0, "sample_loadings_row: bad row index");
  detail::require(factors.cols() == y_row.size() && factors.cols() == h_row.size() &&
                      factors.rows() == psi.size(),
                  "sample_loadings_row: dimension mismatch");
  RegressionWs ws;
  loadings_row_draw(rng, factors, y_row, h_row, psi, ws);
  return ws.rhs;
}

Vector sample_factors_at(Rng& rng, int t, const LoadingsMatrix& loadings,
                         const Eigen::Ref<const Vector>& y_t,
                         const Eigen::Ref<const Vector>& h_idio_t,
                         const Eigen::Ref<const Vector>& h_factor_t) {
  detail::require(y_t.size() == loadings.m() && h_idio_t.size() == loadings.m() &&
                      h_factor_t.size() == loadings.r(),
                  "sample_factors_at: dimension mismatch");
  (void)t;
  RegressionWs ws;
  factor_draw(rng, loadings, y_t, h_idio_t, h_factor_t, ws);
  return ws.rhs;
}

void deep_interweaving_hook(LatentState& state, const DeepInterweavingMove& move) {
  if (move) move(state);
}

void permute_loading_columns(LatentState& state, const std::vector<int>& perm) {
  const int r = state.loadings.r();
  detail::require(static_cast<int>(perm.size()) == r, "permute_loading_columns: bad size");
  std::vector<int> seen(r, 0);
  bool identity = true;
  for (int j = 0; j < r; ++j) {
    detail::require(perm[j] >= 0 && perm[j] < r && !seen[perm[j]]++,
                    "permute_loading_columns: not a permutation");
    identity = identity && perm[j] == j;
  }
  if (identity) return;
  detail::require(!state.loadings.restricted,
                  "permute_loading_columns: permuting restricted loadings breaks the pattern");
  LatentState out = state;
  for (int j = 0; j < r; ++j) {
    out.loadings.entries.col(j) = state.loadings.entries.col(perm[j]);
    out.factors.row(j) = state.factors.row(perm[j]);
    out.h.factor.row(j) = state.h.factor.row(perm[j]);
    out.theta_factor[j] = state.theta_factor[perm[j]];
    out.shrinkage.tau2.col(j) = state.shrinkage.tau2.col(perm[j]);
    if (state.shrinkage.lambda2.size() == r)
      out.shrinkage.lambda2[j] = state.shrinkage.lambda2[perm[j]];
  }
  state = std::move(out);
}

LatentState initial_state(const ReturnsPanel& data, const ChainConfig& cfg) {
  const int m = data.m(), T = data.T(), r = cfg.r;
  Rng rng(site_handle({cfg.seed, 0}, kTagInit, 0));
  LatentState s;
  s.loadings.restricted = cfg.restricted_loadings;
  s.loadings.entries = Matrix::Zero(m, r);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < r; ++j)
      if (!cfg.restricted_loadings || j <= i) s.loadings.entries(i, j) = rng.normal();
  s.factors = cfg.fixed_factors ? *cfg.fixed_factors : Matrix::Zero(r, T);
  s.h.idio = Matrix::Zero(m, T + 1);
  s.h.factor = Matrix::Zero(r, T + 1);
  s.theta_idio.resize(m);
  for (int i = 0; i < m; ++i) {
    const double row_var = std::max(data.values.row(i).squaredNorm() / T, 1e-8);
    s.theta_idio[i] = SvParams{std::log(row_var), 0.9, 0.1};
  }
  s.theta_factor.assign(r, SvParams{0.0, 0.9, 0.1});
  const double tau2_init = cfg.loadings_prior.variant == LoadingsPriorVariant::fixed_gaussian
                               ? cfg.loadings_prior.tau2_fixed
                               : 1.0;
  s.shrinkage.tau2 = Matrix::Constant(m, r, tau2_init);
  switch (cfg.loadings_prior.variant) {
    case LoadingsPriorVariant::fixed_gaussian:
      s.shrinkage.lambda2 = Vector();
      break;
    case LoadingsPriorVariant::normal_gamma_rowwise:
      s.shrinkage.lambda2 = Vector::Ones(m);
      break;
    case LoadingsPriorVariant::normal_gamma_columnwise:
      s.shrinkage.lambda2 = Vector::Ones(r);
      break;
  }
  return s;
}

struct GibbsChain::Impl {
  ReturnsPanel data;
  ChainConfig cfg;
  DeepInterweavingMove move;
  LatentState state;
  Streams streams;
  std::vector<ThreadWs> tws;
  Matrix resid;

  Impl(const ReturnsPanel& data_in, ChainConfig cfg_in, DeepInterweavingMove move_in)
      : data(data_in),
        cfg(std::move(cfg_in)),
        move(std::move(move_in)),
        state(initial_state(data_in, cfg)),
        streams(RngHandle{cfg.seed, 0}, data_in.m(), cfg.r, data_in.T()),
        tws(std::max(1, cfg.threads)),
        resid(data_in.m(), data_in.T()) {}
};

GibbsChain::GibbsChain(const ReturnsPanel& data, ChainConfig cfg, DeepInterweavingMove move) {
  data.validate();
  cfg.validate(data.m(), data.T());
  impl_ = std::make_unique<Impl>(data, std::move(cfg), std::move(move));
}

GibbsChain::~GibbsChain() = default;
GibbsChain::GibbsChain(GibbsChain&&) noexcept = default;

void GibbsChain::sweep() {
  sweep_impl(impl_->data, impl_->state, impl_->cfg, impl_->streams, impl_->tws, impl_->resid,
             impl_->move);
}

const LatentState& GibbsChain::state() const { return impl_->state; }
LatentState& GibbsChain::state() { return impl_->state; }
const ChainConfig& GibbsChain::config() const { return impl_->cfg; }

LatentState gibbs_sweep(RngHandle rng_base, const ReturnsPanel& data, const LatentState& state,
                        const ChainConfig& cfg, const DeepInterweavingMove& move) {
  data.validate();
  cfg.validate(data.m(), data.T());
  LatentState out = state;
  Streams streams(rng_base, data.m(), cfg.r, data.T());
  std::vector<ThreadWs> tws(std::max(1, cfg.threads));
  Matrix resid(data.m(), data.T());
  sweep_impl(data, out, cfg, streams, tws, resid, move);
  return out;
}

DrawStore run_chain(const ReturnsPanel& data, const ChainConfig& cfg,
                    const DeepInterweavingMove& move) {
  GibbsChain chain(data, cfg, move);
  DrawStore store;
  store.config = cfg;
  store.m = data.m();
  store.T = data.T();
  store.data_fingerprint = panel_fingerprint(data);
  const int kept = std::max(0, (cfg.n_draws - cfg.burn_in) / cfg.thin);
  store.snapshots.reserve(kept);
  for (int it = 1; it <= cfg.n_draws; ++it) {
    try {
      chain.sweep();
    } catch (const std::exception& e) {
      throw numerical_error("run_chain: iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0)
      store.snapshots.push_back(chain.state());
  }
  return store;
}

std::uint64_t panel_fingerprint(const ReturnsPanel& data) {
  std::uint64_t h = detail::fnv1a64(data.values.data(), sizeof(double) * data.values.size());
  for (const auto& s : data.series_labels) h = detail::fnv1a64(s, h);
  for (const auto& s : data.date_labels) h = detail::fnv1a64(s, h);
  return h;
}

std::uint64_t drawstore_fingerprint(const DrawStore& store) {
  std::uint64_t h = detail::fnv1a64(&store.data_fingerprint, sizeof(store.data_fingerprint));
  auto hash_mat = [&h](const Matrix& m) {
    h = detail::fnv1a64(m.data(), sizeof(double) * m.size(), h);
  };
  auto hash_vec = [&h](const Vector& v) {
    h = detail::fnv1a64(v.data(), sizeof(double) * v.size(), h);
  };
  for (const auto& s : store.snapshots) {
    hash_mat(s.loadings.entries);
    hash_mat(s.factors);
    hash_mat(s.h.idio);
    hash_mat(s.h.factor);
    for (const auto& p : s.theta_idio) h = detail::fnv1a64(&p, sizeof(double) * 3, h);
    for (const auto& p : s.theta_factor) h = detail::fnv1a64(&p, sizeof(double) * 3, h);
    hash_mat(s.shrinkage.tau2);
    hash_vec(s.shrinkage.lambda2);
  }
  return h;
}

}  // namespace fsv
