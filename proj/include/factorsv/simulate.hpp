#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "factorsv/types.hpp"

namespace fsv {

struct SvParamRange {
  double mu_min = -1.5, mu_max = 0.5;
  double phi_min = 0.90, phi_max = 0.98;
  double sigma_min = 0.1, sigma_max = 0.3;
};

struct SimSpec {
  int m = 10;
  int T = 1000;
  int r_true = 2;
  bool restricted = true;  // zeros above the diagonal, for simulation
  // Explicit loadings take precedence; otherwise standard-normal entries with
  // exactly round(zero_fraction * active cells) forced to zero.
  std::optional<Matrix> loadings_explicit;
  double zero_fraction = 0.0;
  SvParamRange idio_range{};
  SvParamRange factor_range{0.0, 0.0, 0.90, 0.98, 0.1, 0.3};  // mu fixed at 0
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  ReturnsPanel data;
  LoadingsMatrix loadings;
  LogVariancePaths h;
  Matrix factors;  // r x T
  std::vector<SvParams> theta_idio, theta_factor;
};

// Draw SV parameters and paths, factors and observations from the model;
// bit-identical regeneration from the same spec.
GroundTruth simulate_fsv(const SimSpec& spec);

Matrix true_covariance_at(const GroundTruth& truth, int t);

// Correlation matrices implied by the simulated latents, one per time point.
std::vector<Matrix> true_correlation_series(const GroundTruth& truth);

}  // namespace fsv
