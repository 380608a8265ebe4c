#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "factorsv/model_core.hpp"
#include "factorsv/rng.hpp"

using namespace fsv;

namespace {

LoadingsMatrix random_loadings(Rng& rng, int m, int r, bool restricted = false) {
  LoadingsMatrix out;
  out.restricted = restricted;
  out.entries = Matrix::Zero(m, r);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < r; ++j)
      if (!restricted || j <= i) out.entries(i, j) = rng.normal();
  return out;
}

Vector random_vec(Rng& rng, int n, double scale) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

// brute-force triple loop: sum over factors of exp(h_j) L_ij L_kj, plus diagonal
Matrix covariance_bruteforce(const LoadingsMatrix& L, const Vector& hf, const Vector& hi) {
  const int m = L.m(), r = L.r();
  Matrix sigma = Matrix::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int j = 0; j < r; ++j)
        sigma(a, b) += std::exp(hf[j]) * L.entries(a, j) * L.entries(b, j);
  for (int a = 0; a < m; ++a) sigma(a, a) += std::exp(hi[a]);
  return sigma;
}

}  // namespace

TEST_CASE("covariance_at: no factors reduces to the idiosyncratic diagonal") {
  LoadingsMatrix L;
  L.entries = Matrix::Zero(2, 0);
  const auto cov = covariance_at(L, Vector::Zero(0), Vector::Zero(2));
  CHECK(cov.sigma.isApprox(Matrix::Identity(2, 2)));
}

TEST_CASE("covariance_at: direct 2x2 expansion") {
  LoadingsMatrix L;
  L.entries = Matrix::Ones(2, 1);
  Vector hf = Vector::Zero(1), hi = Vector::Zero(2);
  const auto cov = covariance_at(L, hf, hi);
  Matrix expect(2, 2);
  expect << 2, 1, 1, 2;
  CHECK((cov.sigma - expect).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("covariance_at: matches the brute-force triple loop") {
  Rng rng(7, 0);
  const auto L = random_loadings(rng, 5, 2);
  const Vector hf = random_vec(rng, 2, 1.0), hi = random_vec(rng, 5, 1.0);
  const auto cov = covariance_at(L, hf, hi);
  const Matrix brute = covariance_bruteforce(L, hf, hi);
  CHECK((cov.sigma - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_at: dimension mismatch is a contract violation") {
  LoadingsMatrix L;
  L.entries = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(covariance_at(L, Vector::Zero(2), Vector::Zero(2)), contract_error);
}

TEST_CASE("covariance_at: symmetric positive definite on random instances") {
  Rng rng(11, 0);
  for (int m : {5, 30, 100}) {
    const auto L = random_loadings(rng, m, 3);
    const Vector hf = random_vec(rng, 3, 2.0), hi = random_vec(rng, m, 2.0);
    const auto cov = covariance_at(L, hf, hi);
    CHECK((cov.sigma - cov.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov.sigma);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    for (int i = 0; i < m; ++i) CHECK(cov.sigma(i, i) >= std::exp(hi[i]) - 1e-12);
  }
}

TEST_CASE("covariance_at: invariant under loadings column sign flips") {
  Rng rng(13, 0);
  auto L = random_loadings(rng, 8, 3);
  const Vector hf = random_vec(rng, 3, 1.5), hi = random_vec(rng, 8, 1.5);
  const Matrix base = covariance_at(L, hf, hi).sigma;
  for (int j = 0; j < 3; ++j) {
    LoadingsMatrix flipped = L;
    flipped.entries.col(j) *= -1.0;
    CHECK((covariance_at(flipped, hf, hi).sigma - base).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("correlation_from_covariance: identity and 2x2") {
  CHECK(correlation_from_covariance(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  Matrix sigma(2, 2);
  sigma << 2, 1, 1, 2;
  const Matrix corr = correlation_from_covariance(sigma);
  CHECK(corr(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(corr(0, 0) == 1.0);
}

TEST_CASE("correlation_from_covariance: bounded entries and error path") {
  Rng rng(17, 0);
  const auto L = random_loadings(rng, 6, 2);
  const auto cov = covariance_at(L, random_vec(rng, 2, 2.0), random_vec(rng, 6, 2.0));
  const Matrix corr = correlation_from_covariance(cov.sigma);
  CHECK(corr.cwiseAbs().maxCoeff() <= 1.0);
  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(correlation_from_covariance(bad), domain_error);
}

TEST_CASE("communalities: no-factor case and 2x2 hand case") {
  LoadingsMatrix empty;
  empty.entries = Matrix::Zero(3, 0);
  const auto [per0, joint0] = communalities(empty, Vector::Zero(0), Vector::Zero(3));
  CHECK(per0.cwiseAbs().maxCoeff() == 0.0);
  CHECK(joint0 == 0.0);

  LoadingsMatrix L;
  L.entries = Matrix::Zero(2, 1);
  L.entries(0, 0) = 1.0;
  const auto [per, joint] = communalities(L, Vector::Zero(1), Vector::Zero(2));
  CHECK(per[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(per[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(joint == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("communalities: matches the covariance_at oracle and stays in [0,1]") {
  Rng rng(19, 0);
  const auto L = random_loadings(rng, 7, 3);
  const Vector hf = random_vec(rng, 3, 1.0), hi = random_vec(rng, 7, 1.0);
  const auto [per, joint] = communalities(L, hf, hi);
  const auto cov = covariance_at(L, hf, hi);
  double sum = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double expect = 1.0 - std::exp(hi[i]) / cov.sigma(i, i);
    CHECK(per[i] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(per[i] >= 0.0);
    CHECK(per[i] <= 1.0);
    sum += per[i];
  }
  CHECK(joint == sum / 7.0);  // exact arithmetic mean
}

TEST_CASE("precision_woodbury: zero loadings reduce to the diagonal inverse") {
  LoadingsMatrix L;
  L.entries = Matrix::Zero(4, 2);
  Vector hi(4);
  hi << 0.3, -0.2, 1.0, -1.5;
  const Matrix prec = precision_woodbury(L, Vector::Zero(2), hi);
  CHECK((prec.diagonal().array() - (-hi).array().exp()).abs().maxCoeff() < 1e-14);
  CHECK((prec - Matrix(prec.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("precision_woodbury: matches the dense inverse and inverts covariance_at") {
  Rng rng(23, 0);
  const auto L = random_loadings(rng, 50, 5);
  const Vector hf = random_vec(rng, 5, 2.0), hi = random_vec(rng, 50, 2.0);
  const Matrix prec = precision_woodbury(L, hf, hi);
  const Matrix cov = covariance_at(L, hf, hi).sigma;
  const Matrix dense_inv = cov.fullPivLu().inverse();
  CHECK((prec - dense_inv).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((prec * cov - Matrix::Identity(50, 50)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("precision_woodbury: product identity across |h| up to 6") {
  Rng rng(29, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 10 + static_cast<int>(rng.next_u64() % 30);
    const auto L = random_loadings(rng, m, 4);
    const Vector hf = random_vec(rng, 4, 3.0), hi = random_vec(rng, m, 3.0);
    const Matrix prec = precision_woodbury(L, hf, hi);
    const Matrix cov = covariance_at(L, hf, hi).sigma;
    CHECK((prec * cov - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("logdet_covariance: closed forms and the dense oracle") {
  LoadingsMatrix zero;
  zero.entries = Matrix::Zero(3, 1);
  CHECK(logdet_covariance(zero, Vector::Zero(1), Vector::Zero(3)) ==
        doctest::Approx(0.0).epsilon(1e-14));

  LoadingsMatrix L;
  L.entries = Matrix::Ones(2, 1);
  CHECK(logdet_covariance(L, Vector::Zero(1), Vector::Zero(2)) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));

  Rng rng(31, 0);
  const auto R = random_loadings(rng, 50, 5);
  const Vector hf = random_vec(rng, 5, 2.0), hi = random_vec(rng, 50, 2.0);
  const Matrix cov = covariance_at(R, hf, hi).sigma;
  const double dense = std::log(cov.fullPivLu().determinant());
  CHECK(logdet_covariance(R, hf, hi) == doctest::Approx(dense).epsilon(1e-8));
}

TEST_CASE("logdet_covariance: dense agreement at m=200, r=20") {
  Rng rng(37, 0);
  const auto L = random_loadings(rng, 200, 20);
  const Vector hf = random_vec(rng, 20, 1.5), hi = random_vec(rng, 200, 1.5);
  const Matrix cov = covariance_at(L, hf, hi).sigma;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const double dense = es.eigenvalues().array().log().sum();
  CHECK(std::abs(logdet_covariance(L, hf, hi) - dense) < 1e-8);
}

TEST_CASE("gaussian_logdensity_woodbury: matches the dense evaluation") {
  Rng rng(41, 0);
  const auto L = random_loadings(rng, 50, 5);
  const Vector hf = random_vec(rng, 5, 1.5), hi = random_vec(rng, 50, 1.5);
  const Vector y = random_vec(rng, 50, 2.0);
  const Matrix cov = covariance_at(L, hf, hi).sigma;
  const Matrix dense_inv = cov.fullPivLu().inverse();
  const double dense = -0.5 * (50 * std::log(2.0 * M_PI) +
                               std::log(cov.fullPivLu().determinant()) + y.dot(dense_inv * y));
  CHECK(gaussian_logdensity_woodbury(L, hf, hi, y) == doctest::Approx(dense).epsilon(1e-10));
}

TEST_CASE("log-variance clamp keeps the kernels finite at extreme inputs") {
  LoadingsMatrix L;
  L.entries = Matrix::Ones(2, 1);
  Vector hf(1), hi(2);
  hf << 500.0;
  hi << -500.0, 500.0;
  const auto cov = covariance_at(L, hf, hi);
  CHECK(cov.sigma.allFinite());
  CHECK(std::isfinite(logdet_covariance(L, hf, hi)));
}

TEST_CASE("panel and loadings invariants are enforced") {
  ReturnsPanel p;
  p.values = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(p.validate(), contract_error);  // T >= 2
  p.values = Matrix::Ones(2, 3);
  p.demeaned = true;
  CHECK_THROWS_AS(p.validate(), domain_error);  // rows not centered

  LoadingsMatrix L;
  L.entries = Matrix::Ones(2, 2);
  L.restricted = true;
  CHECK_THROWS_AS(L.validate(), domain_error);
}
