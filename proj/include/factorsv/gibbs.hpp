#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "factorsv/rng.hpp"
#include "factorsv/sv_univariate.hpp"
#include "factorsv/types.hpp"

namespace fsv {

enum class LoadingsPriorVariant { fixed_gaussian, normal_gamma_rowwise, normal_gamma_columnwise };

const char* to_string(LoadingsPriorVariant v);
LoadingsPriorVariant loadings_prior_variant_from_string(const std::string& name);

struct LoadingsPriorConfig {
  LoadingsPriorVariant variant = LoadingsPriorVariant::normal_gamma_rowwise;
  double tau2_fixed = 1.0;               // fixed_gaussian only
  double a = 0.1, c = 0.001, d = 0.001;  // shrinkage variants; a = 1 is the Bayesian Lasso

  void validate() const;
};

// Local (tau^2) and global (lambda^2) shrinkage variances. lambda2 has length
// m for row-wise and r for column-wise shrinkage; it is empty for the fixed
// Gaussian prior. tau2 cells above the diagonal are ignored when restricted.
struct ShrinkageState {
  Matrix tau2;
  Vector lambda2;
};

struct ChainConfig {
  int r = 1;
  int n_draws = 11000;
  int burn_in = 1000;
  int thin = 10;
  bool restricted_loadings = false;
  std::optional<Matrix> fixed_factors;  // r x T; when set, the factor draw is skipped
  SvPriors sv_priors_idio{0.0, 1000.0, 10.0, 2.5, 1.0};
  SvPriors sv_priors_factor{0.0, 1000.0, 2.5, 2.5, 1.0};
  LoadingsPriorConfig loadings_prior;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate(int m, int T) const;
};

// One full MCMC configuration.
struct LatentState {
  LoadingsMatrix loadings;
  Matrix factors;  // r x T
  LogVariancePaths h;
  std::vector<SvParams> theta_idio;    // length m
  std::vector<SvParams> theta_factor;  // length r, mu == 0
  ShrinkageState shrinkage;
};

// Thinned post-burn-in snapshots plus run metadata.
struct DrawStore {
  std::vector<LatentState> snapshots;
  ChainConfig config;
  int m = 0;
  int T = 0;
  std::uint64_t data_fingerprint = 0;
};

// --- shrinkage hierarchy -----------------------------------------------------

void update_shrinkage_rowwise(Rng& rng, const LoadingsMatrix& loadings, ShrinkageState& state,
                              const LoadingsPriorConfig& cfg);
void update_shrinkage_columnwise(Rng& rng, const LoadingsMatrix& loadings, ShrinkageState& state,
                                 const LoadingsPriorConfig& cfg);

// Gamma (shape, rate) of the global-variance conditionals, exposed for tests.
std::pair<double, double> shrinkage_gamma_params_row(int i, const LoadingsMatrix& loadings,
                                                     const ShrinkageState& state,
                                                     const LoadingsPriorConfig& cfg);
std::pair<double, double> shrinkage_gamma_params_col(int j, const LoadingsMatrix& loadings,
                                                     const ShrinkageState& state,
                                                     const LoadingsPriorConfig& cfg);

// --- regression updates ------------------------------------------------------

// Row i of the loadings from its Gaussian regression conditional. `factors`
// carries the active rows only (r~ x T), `psi` the prior precisions 1/tau^2.
Vector sample_loadings_row(Rng& rng, int i, const Eigen::Ref<const Matrix>& factors,
                           const Eigen::Ref<const Vector>& y_row,
                           const Eigen::Ref<const Vector>& h_row,
                           const Eigen::Ref<const Vector>& psi);

// Factor vector at time t from its Gaussian regression conditional.
Vector sample_factors_at(Rng& rng, int t, const LoadingsMatrix& loadings,
                         const Eigen::Ref<const Vector>& y_t,
                         const Eigen::Ref<const Vector>& h_idio_t,
                         const Eigen::Ref<const Vector>& h_factor_t);

// --- sweep orchestration -----------------------------------------------------

// Extension point for a loadings boosting move; identity when empty.
using DeepInterweavingMove = std::function<void(LatentState&)>;

void deep_interweaving_hook(LatentState& state, const DeepInterweavingMove& move = {});

// Consistently permute factor columns (loadings columns, factor rows, factor
// log-variance paths and parameters, shrinkage columns); leaves every
// covariance_at output unchanged.
void permute_loading_columns(LatentState& state, const std::vector<int>& perm);

// Owns the per-site RNG streams and workspaces of one chain.
class GibbsChain {
 public:
  GibbsChain(const ReturnsPanel& data, ChainConfig cfg, DeepInterweavingMove move = {});
  ~GibbsChain();
  GibbsChain(GibbsChain&&) noexcept;

  void sweep();
  const LatentState& state() const;
  LatentState& state();
  const ChainConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One full pass of the posterior sampler (SV blocks, shrinkage, loadings,
// factors) with streams derived from `rng_base`; returns the new state.
LatentState gibbs_sweep(RngHandle rng_base, const ReturnsPanel& data, const LatentState& state,
                        const ChainConfig& cfg, const DeepInterweavingMove& move = {});

// Initial chain state: standard-normal loadings, zero factors and paths,
// mu_i at the log sample variance, phi = 0.9, sigma = 0.1, unit shrinkage.
LatentState initial_state(const ReturnsPanel& data, const ChainConfig& cfg);

DrawStore run_chain(const ReturnsPanel& data, const ChainConfig& cfg,
                    const DeepInterweavingMove& move = {});

std::uint64_t panel_fingerprint(const ReturnsPanel& data);
std::uint64_t drawstore_fingerprint(const DrawStore& store);

}  // namespace fsv
