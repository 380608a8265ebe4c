#pragma once

#include <vector>

#include "factorsv/rng.hpp"
#include "factorsv/types.hpp"

namespace fsv {

struct SvPriors {
  double b_mu = 0.0;
  double B_mu = 1000.0;
  double a0 = 10.0;   // (phi+1)/2 ~ Beta(a0, b0)
  double b0 = 2.5;
  double B_sigma = 1.0;  // sigma^2 ~ B_sigma * chi^2_1

  void validate() const {
    if (!(B_mu > 0.0) || !(a0 > 0.0) || !(b0 > 0.0) || !(B_sigma > 0.0))
      throw domain_error("SvPriors: positivity constraint violated");
  }
};

// One latent log-variance process: states (length T+1, index 0 is the initial
// state) plus its AR(1) parameters. Factor blocks have no level (mu == 0).
struct SvBlock {
  Vector states;
  SvParams params;
  bool has_level = true;
};

struct SvUpdateWorkspace {
  Vector ystar;              // log(y^2 + c)
  std::vector<int> mixture;  // component indicator per observation
  Vector diag, offdiag, rhs, noise;  // tridiagonal state draw buffers
  Vector htilde;                     // noncentered path for the interweaving move
  void resize(int T);
};

// One MCMC update of the block given its conditional observation series:
// mixture indicators, joint state path, parameters (centered), then an
// ancillarity-sufficiency interweaving redraw of level and scale.
void sv_update(Rng& rng, const Eigen::Ref<const Vector>& observations, SvBlock& block,
               const SvPriors& priors, SvUpdateWorkspace& ws);

inline SvBlock sv_update(Rng& rng, const Eigen::Ref<const Vector>& observations,
                         const SvBlock& block, const SvPriors& priors) {
  SvBlock out = block;
  SvUpdateWorkspace ws;
  sv_update(rng, observations, out, priors, ws);
  return out;
}

// Draw from the stationary law N(mu * [has_level], sigma^2 / (1 - phi^2)).
double sv_stationary_init(Rng& rng, const SvParams& params, bool has_level);

namespace sv_detail {
// 10-component Gaussian mixture approximation to the log chi^2_1 innovation.
inline constexpr int kMixtureSize = 10;
extern const double kMixtureProb[kMixtureSize];
extern const double kMixtureMean[kMixtureSize];
extern const double kMixtureVar[kMixtureSize];
inline constexpr double kLogOffset = 1e-8;  // y* = log(y^2 + c)
}  // namespace sv_detail

}  // namespace fsv
