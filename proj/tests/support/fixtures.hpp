#pragma once

#include "factorsv/simulate.hpp"

namespace testsupport {

// Two-factor, ten-series panel with a structurally uncorrelated series 9
// (zero loadings row) and the upper-triangle restriction; the workhorse
// fixture for the recovery and forecasting suites.
inline fsv::SimSpec two_factor_fixture_spec(int T = 1000, std::uint64_t seed = 20240801ULL) {
  fsv::SimSpec spec;
  spec.m = 10;
  spec.T = T;
  spec.r_true = 2;
  spec.restricted = true;
  fsv::Matrix loadings(10, 2);
  // hand-picked nonzero values; row 9 (index 8) is identically zero
  loadings << 0.9, 0.0,
      -0.7, 0.8,
      1.1, -0.6,
      0.5, 0.9,
      -0.8, 0.4,
      0.6, -0.7,
      1.0, 0.5,
      -0.5, 1.0,
      0.0, 0.0,
      0.8, -0.6;
  spec.loadings_explicit = loadings;
  spec.idio_range = fsv::SvParamRange{-1.0, 0.0, 0.90, 0.97, 0.15, 0.25};
  spec.factor_range = fsv::SvParamRange{0.0, 0.0, 0.90, 0.97, 0.15, 0.25};
  spec.seed = seed;
  return spec;
}

}  // namespace testsupport
