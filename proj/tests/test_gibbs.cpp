#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "factorsv/gibbs.hpp"
#include "factorsv/model_core.hpp"
#include "factorsv/samplers.hpp"
#include "factorsv/simulate.hpp"
#include "support/stats.hpp"

using namespace fsv;
using namespace testsupport;

namespace {

ReturnsPanel small_panel(int m, int T, std::uint64_t seed) {
  SimSpec spec;
  spec.m = m;
  spec.T = T;
  spec.r_true = std::min(2, m);
  spec.restricted = true;
  spec.seed = seed;
  return simulate_fsv(spec).data;
}

}  // namespace

TEST_CASE("shrinkage gamma parameters: row-wise shapes count active cells") {
  LoadingsMatrix L;
  L.restricted = true;
  L.entries = Matrix::Ones(3, 3).triangularView<Eigen::Lower>();
  LoadingsPriorConfig cfg;
  cfg.variant = LoadingsPriorVariant::normal_gamma_rowwise;
  cfg.a = 0.1;
  cfg.c = 0.001;
  cfg.d = 0.001;
  ShrinkageState st;
  st.tau2 = Matrix::Constant(3, 3, 2.0);
  st.lambda2 = Vector::Ones(3);
  // inactive cells must not contribute to the rate
  st.tau2(0, 1) = st.tau2(0, 2) = st.tau2(1, 2) = 1e12;

  const auto [s0, r0] = shrinkage_gamma_params_row(0, L, st, cfg);
  CHECK(s0 == doctest::Approx(cfg.c + cfg.a * 1));
  CHECK(r0 == doctest::Approx(cfg.d + 0.5 * cfg.a * 2.0));
  const auto [s2, r2] = shrinkage_gamma_params_row(2, L, st, cfg);
  CHECK(s2 == doctest::Approx(cfg.c + cfg.a * 3));
  CHECK(r2 == doctest::Approx(cfg.d + 0.5 * cfg.a * 6.0));

  L.restricted = false;
  const auto [s0u, r0u] = shrinkage_gamma_params_row(0, L, st, cfg);
  CHECK(s0u == doctest::Approx(cfg.c + cfg.a * 3));
  (void)r0u;
}

TEST_CASE("shrinkage gamma parameters: column-wise shapes") {
  LoadingsMatrix L;
  L.entries = Matrix::Ones(3, 3);
  LoadingsPriorConfig cfg;
  cfg.variant = LoadingsPriorVariant::normal_gamma_columnwise;
  cfg.a = 0.1;
  cfg.c = 0.001;
  cfg.d = 0.001;
  ShrinkageState st;
  st.tau2 = Matrix::Constant(3, 3, 2.0);
  st.lambda2 = Vector::Ones(3);

  L.restricted = false;
  for (int j = 0; j < 3; ++j) {
    const auto [s, r] = shrinkage_gamma_params_col(j, L, st, cfg);
    CHECK(s == doctest::Approx(cfg.c + cfg.a * 3));  // every column uses all m rows
    (void)r;
  }
  L.restricted = true;
  const auto [s2, r2] = shrinkage_gamma_params_col(2, L, st, cfg);
  CHECK(s2 == doctest::Approx(cfg.c + cfg.a * 1));
  CHECK(r2 == doctest::Approx(cfg.d + 0.5 * cfg.a * 2.0));
}

TEST_CASE("update_shrinkage_rowwise: the global draw matches its Gamma conditional mean") {
  LoadingsMatrix L;
  L.restricted = false;
  L.entries = Matrix::Zero(1, 1);
  LoadingsPriorConfig cfg;
  cfg.variant = LoadingsPriorVariant::normal_gamma_rowwise;
  cfg.a = 0.1;
  cfg.c = 0.5;
  cfg.d = 0.7;
  const double tau2_fixed_value = 2.5;
  Rng rng(9, 1);
  std::vector<double> lambda2_draws;
  for (int k = 0; k < 300000; ++k) {
    ShrinkageState st;
    st.tau2 = Matrix::Constant(1, 1, tau2_fixed_value);
    st.lambda2 = Vector::Ones(1);
    update_shrinkage_rowwise(rng, L, st, cfg);
    lambda2_draws.push_back(st.lambda2[0]);
  }
  const double expect = (cfg.c + cfg.a * 1) / (cfg.d + 0.5 * cfg.a * tau2_fixed_value);
  CHECK(mean_of(lambda2_draws) == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("update_shrinkage: a = 1 draws the Bayesian-Lasso GIG conditional") {
  LoadingsMatrix L;
  L.restricted = false;
  L.entries = Matrix::Constant(1, 1, 0.6);
  LoadingsPriorConfig cfg;
  cfg.variant = LoadingsPriorVariant::normal_gamma_rowwise;
  cfg.a = 1.0;
  cfg.c = 0.3;
  cfg.d = 0.4;
  ShrinkageState st;
  st.tau2 = Matrix::Constant(1, 1, 1.7);
  st.lambda2 = Vector::Ones(1);
  Rng rng(9, 2);
  update_shrinkage_rowwise(rng, L, st, cfg);
  // replay the exact same stream by hand: Gamma then GIG(1/2, lambda2, loading^2)
  Rng replay(9, 2);
  const double lam2 = sample_gamma(replay, cfg.c + 1.0, cfg.d + 0.5 * 1.7);
  const double tau2 = sample_gig(replay, 0.5, lam2, 0.36);
  CHECK(st.lambda2[0] == lam2);
  CHECK(st.tau2(0, 0) == tau2);
}

TEST_CASE("update_shrinkage: positivity and restricted cells left alone") {
  Rng rng(9, 3);
  LoadingsMatrix L;
  L.restricted = true;
  L.entries = Matrix::Zero(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= std::min(i, 2); ++j) L.entries(i, j) = rng.normal();
  LoadingsPriorConfig cfg;
  cfg.variant = LoadingsPriorVariant::normal_gamma_rowwise;
  ShrinkageState st;
  st.tau2 = Matrix::Ones(4, 3);
  st.lambda2 = Vector::Ones(4);
  const double sentinel = 123.25;
  st.tau2(0, 1) = sentinel;
  for (int k = 0; k < 200; ++k) update_shrinkage_rowwise(rng, L, st, cfg);
  CHECK(st.tau2(0, 1) == sentinel);  // above-diagonal cell ignored
  CHECK(st.tau2.minCoeff() > 0.0);
  CHECK(st.lambda2.minCoeff() > 0.0);

  cfg.variant = LoadingsPriorVariant::normal_gamma_columnwise;
  ShrinkageState stc;
  stc.tau2 = Matrix::Ones(4, 3);
  stc.lambda2 = Vector::Ones(3);
  for (int k = 0; k < 200; ++k) update_shrinkage_columnwise(rng, L, stc, cfg);
  CHECK(stc.tau2.minCoeff() > 0.0);
}

TEST_CASE("sample_loadings_row: an effectively dogmatic prior pins the draw at zero") {
  Rng rng(11, 1);
  const int T = 200;
  Matrix factors(1, T);
  Vector y(T), h = Vector::Zero(T);
  for (int t = 0; t < T; ++t) {
    factors(0, t) = rng.normal();
    y[t] = 0.8 * factors(0, t) + rng.normal();
  }
  const Vector psi = Vector::Constant(1, 1e12);  // tau^2 = 1e-12
  for (int rep = 0; rep < 20; ++rep) {
    const Vector draw = sample_loadings_row(rng, 0, factors, y, h, psi);
    CHECK(std::abs(draw[0]) < 1e-4);
  }
}

TEST_CASE("sample_loadings_row: zero design gives the prior-only posterior") {
  Rng rng(11, 2);
  const int T = 50;
  const Matrix factors = Matrix::Zero(2, T);
  const Vector y = Vector::Zero(T), h = Vector::Zero(T);
  Vector psi(2);
  psi << 4.0, 0.25;
  std::vector<double> d0, d1;
  for (int k = 0; k < 200000; ++k) {
    const Vector draw = sample_loadings_row(rng, 0, factors, y, h, psi);
    d0.push_back(draw[0]);
    d1.push_back(draw[1]);
  }
  CHECK(variance_of(d0) == doctest::Approx(0.25).epsilon(0.02));
  CHECK(variance_of(d1) == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("sample_loadings_row: draw mean equals the dense weighted-least-squares oracle") {
  Rng sim(11, 3);
  const int T = 2000;
  Matrix factors(1, T);
  Vector y(T), h(T);
  for (int t = 0; t < T; ++t) {
    factors(0, t) = sim.normal();
    h[t] = 0.5 * std::sin(0.01 * t);
    y[t] = 1.3 * factors(0, t) + std::exp(0.5 * h[t]) * sim.normal();
  }
  const Vector psi = Vector::Constant(1, 2.0);

  const RngHandle handle{77, 5};
  Rng rng(handle);
  const Vector draw = sample_loadings_row(rng, 0, factors, y, h, psi);

  // reconstruct the injected standard normals from an identical stream and
  // peel them off the draw: what remains must equal (X'X + Psi)^{-1} X'y~
  Rng replay(handle);
  Vector z(1);
  z[0] = replay.normal();
  Matrix xtx(1, 1);
  xtx.setZero();
  Vector xty = Vector::Zero(1);
  for (int t = 0; t < T; ++t) {
    const double w = std::exp(-h[t]);
    xtx(0, 0) += w * factors(0, t) * factors(0, t);
    xty[0] += w * factors(0, t) * y[t];
  }
  const Matrix a = xtx + Matrix(psi.asDiagonal());
  const double chol = std::sqrt(a(0, 0));
  const double mean_dense = (xty[0] / a(0, 0));
  const double draw_expected = mean_dense + z[0] / chol;
  CHECK(draw[0] == doctest::Approx(draw_expected).epsilon(1e-12));
  // and the de-noised draw matches the dense WLS solution to 1e-10
  CHECK(draw[0] - z[0] / chol == doctest::Approx(mean_dense).epsilon(1e-10));
}

TEST_CASE("sample_factors_at: prior-only and scalar closed forms") {
  {
    Rng rng(13, 1);
    LoadingsMatrix L;
    L.entries = Matrix::Zero(3, 2);
    Vector hf(2);
    hf << std::log(2.0), std::log(0.5);
    std::vector<double> f0, f1;
    for (int k = 0; k < 200000; ++k) {
      const Vector f = sample_factors_at(rng, 0, L, Vector::Zero(3), Vector::Zero(3), hf);
      f0.push_back(f[0]);
      f1.push_back(f[1]);
    }
    CHECK(variance_of(f0) == doctest::Approx(2.0).epsilon(0.02));
    CHECK(variance_of(f1) == doctest::Approx(0.5).epsilon(0.02));
  }
  {
    Rng rng(13, 2);
    LoadingsMatrix L;
    L.entries = Matrix::Ones(1, 1);
    const double hf = -0.7;
    std::vector<double> draws;
    for (int k = 0; k < 200000; ++k)
      draws.push_back(sample_factors_at(rng, 0, L, Vector::Ones(1), Vector::Zero(1),
                                        Vector::Constant(1, hf))[0]);
    const double expect_var = 1.0 / (1.0 + std::exp(-hf));
    CHECK(variance_of(draws) == doctest::Approx(expect_var).epsilon(0.02));
    CHECK(mean_of(draws) == doctest::Approx(expect_var * 1.0).epsilon(0.05));
  }
}

TEST_CASE("sample_factors_at: moments match the closed-form Gaussian at m=20, r=3") {
  Rng setup(13, 3);
  LoadingsMatrix L;
  L.entries = Matrix::Zero(20, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 3; ++j) L.entries(i, j) = setup.normal();
  Vector y(20), hi(20), hf(3);
  for (int i = 0; i < 20; ++i) {
    y[i] = setup.normal();
    hi[i] = 0.5 * setup.normal();
  }
  for (int j = 0; j < 3; ++j) hf[j] = 0.5 * setup.normal();

  Matrix prec = L.entries.transpose() * (-hi).array().exp().matrix().asDiagonal() * L.entries;
  prec += Matrix((-hf).array().exp().matrix().asDiagonal());
  const Matrix cov_expect = prec.fullPivLu().inverse();
  const Vector mean_expect =
      cov_expect * (L.entries.transpose() * ((-hi).array().exp() * y.array()).matrix());

  Rng rng(13, 4);
  Vector mean_acc = Vector::Zero(3);
  Matrix cov_acc = Matrix::Zero(3, 3);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const Vector f = sample_factors_at(rng, 0, L, y, hi, hf);
    mean_acc += f;
    cov_acc += f * f.transpose();
  }
  const Vector mean_emp = mean_acc / n;
  const Matrix cov_emp = cov_acc / n - mean_emp * mean_emp.transpose();
  CHECK((mean_emp - mean_expect).norm() / mean_expect.norm() < 0.02);
  CHECK((cov_emp - cov_expect).norm() / cov_expect.norm() < 0.02);
}

TEST_CASE("gibbs_sweep: no-factor model degenerates to independent SV updates") {
  const ReturnsPanel panel = small_panel(3, 40, 21);
  ChainConfig cfg;
  cfg.r = 0;
  cfg.n_draws = 2;
  cfg.burn_in = 1;
  cfg.thin = 1;
  cfg.seed = 5;
  LatentState s = initial_state(panel, cfg);
  const LatentState out = gibbs_sweep(RngHandle{5, 0}, panel, s, cfg);
  CHECK(out.loadings.entries.size() == 0);
  CHECK(out.factors.size() == 0);
  CHECK((out.h.idio - s.h.idio).cwiseAbs().maxCoeff() > 0.0);  // states moved
}

TEST_CASE("gibbs_sweep: fixed-factor mode leaves the factors bit-identical") {
  const ReturnsPanel panel = small_panel(4, 30, 22);
  ChainConfig cfg;
  cfg.r = 2;
  cfg.n_draws = 2;
  cfg.burn_in = 1;
  cfg.thin = 1;
  cfg.seed = 6;
  Matrix fixed(2, 30);
  Rng frng(6, 99);
  for (int t = 0; t < 30; ++t)
    for (int j = 0; j < 2; ++j) fixed(j, t) = frng.normal();
  cfg.fixed_factors = fixed;
  LatentState s = initial_state(panel, cfg);
  CHECK(s.factors == fixed);
  LatentState out = gibbs_sweep(RngHandle{6, 0}, panel, s, cfg);
  out = gibbs_sweep(RngHandle{6, 1}, panel, out, cfg);
  CHECK(out.factors == fixed);
}

TEST_CASE("gibbs_sweep: restriction and shrinkage positivity hold after every sweep") {
  const ReturnsPanel panel = small_panel(5, 50, 23);
  ChainConfig cfg;
  cfg.r = 3;
  cfg.n_draws = 2;
  cfg.burn_in = 1;
  cfg.thin = 1;
  cfg.restricted_loadings = true;
  cfg.seed = 7;
  LatentState s = initial_state(panel, cfg);
  for (int k = 0; k < 25; ++k) {
    s = gibbs_sweep(RngHandle{7, static_cast<std::uint64_t>(k)}, panel, s, cfg);
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 3; ++j) CHECK(s.loadings.entries(i, j) == 0.0);
    CHECK(s.shrinkage.tau2.minCoeff() > 0.0);
    CHECK(s.shrinkage.lambda2.minCoeff() > 0.0);
  }
}

TEST_CASE("run_chain: snapshot arithmetic and determinism") {
  const ReturnsPanel panel = small_panel(3, 30, 24);
  ChainConfig cfg;
  cfg.r = 1;
  cfg.n_draws = 10;
  cfg.burn_in = 5;
  cfg.thin = 1;
  cfg.seed = 31;
  const DrawStore a = run_chain(panel, cfg);
  CHECK(a.snapshots.size() == 5);
  const DrawStore b = run_chain(panel, cfg);
  CHECK(drawstore_fingerprint(a) == drawstore_fingerprint(b));
  cfg.seed = 32;
  const DrawStore c = run_chain(panel, cfg);
  CHECK(drawstore_fingerprint(a) != drawstore_fingerprint(c));

  cfg.thin = 2;
  cfg.seed = 31;
  CHECK(run_chain(panel, cfg).snapshots.size() == 2);  // floor(5 / 2)
}

TEST_CASE("run_chain: serial and parallel sweeps are draw-identical") {
  const ReturnsPanel panel = small_panel(4, 60, 25);
  ChainConfig cfg;
  cfg.r = 2;
  cfg.n_draws = 12;
  cfg.burn_in = 2;
  cfg.thin = 1;
  cfg.seed = 99;
  cfg.threads = 1;
  const DrawStore serial = run_chain(panel, cfg);
  cfg.threads = 2;
  const DrawStore parallel = run_chain(panel, cfg);
  CHECK(drawstore_fingerprint(serial) == drawstore_fingerprint(parallel));
}

TEST_CASE("deep_interweaving_hook: identity by default and under a registered no-op") {
  const ReturnsPanel panel = small_panel(3, 20, 26);
  ChainConfig cfg;
  cfg.r = 1;
  cfg.n_draws = 2;
  cfg.burn_in = 1;
  cfg.thin = 1;
  LatentState s = initial_state(panel, cfg);
  const LatentState before = s;
  deep_interweaving_hook(s);
  CHECK(s.loadings.entries == before.loadings.entries);
  deep_interweaving_hook(s, [](LatentState&) {});
  CHECK(s.loadings.entries == before.loadings.entries);
}

TEST_CASE("deep_interweaving_hook: a compensating rescale preserves every covariance") {
  const ReturnsPanel panel = small_panel(4, 25, 27);
  ChainConfig cfg;
  cfg.r = 2;
  cfg.n_draws = 2;
  cfg.burn_in = 1;
  cfg.thin = 1;
  cfg.seed = 12;
  LatentState s = initial_state(panel, cfg);
  s = gibbs_sweep(RngHandle{12, 0}, panel, s, cfg);
  const LatentState before = s;

  // rescale column j by c and shift its log-variance path by -2 log c
  const double scale = 1.7;
  deep_interweaving_hook(s, [&](LatentState& st) {
    st.loadings.entries.col(0) *= scale;
    st.h.factor.row(0).array() -= 2.0 * std::log(scale);
  });
  for (int t = 0; t <= 25; ++t) {
    const Matrix a =
        covariance_at(before.loadings, before.h.factor.col(t), before.h.idio.col(t)).sigma;
    const Matrix b = covariance_at(s.loadings, s.h.factor.col(t), s.h.idio.col(t)).sigma;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("permute_loading_columns: covariance-invariant relabeling") {
  const ReturnsPanel panel = small_panel(5, 20, 28);
  ChainConfig cfg;
  cfg.r = 3;
  cfg.n_draws = 2;
  cfg.burn_in = 1;
  cfg.thin = 1;
  cfg.seed = 13;
  LatentState s = initial_state(panel, cfg);
  s = gibbs_sweep(RngHandle{13, 0}, panel, s, cfg);
  const LatentState before = s;
  permute_loading_columns(s, {2, 0, 1});
  for (int t = 0; t <= 20; t += 5) {
    const Matrix a =
        covariance_at(before.loadings, before.h.factor.col(t), before.h.idio.col(t)).sigma;
    const Matrix b = covariance_at(s.loadings, s.h.factor.col(t), s.h.idio.col(t)).sigma;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(permute_loading_columns(s, {0, 0, 1}), contract_error);
}

TEST_CASE("chain config validation") {
  const ReturnsPanel panel = small_panel(3, 20, 29);
  ChainConfig cfg;
  cfg.r = 1;
  cfg.n_draws = 5;
  cfg.burn_in = 7;
  CHECK_THROWS_AS(cfg.validate(panel.m(), panel.T()), config_error);
  cfg.burn_in = 1;
  cfg.fixed_factors = Matrix::Zero(2, 20);
  CHECK_THROWS_AS(cfg.validate(panel.m(), panel.T()), config_error);
}
