#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "factorsv/errors.hpp"

namespace fsv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// m x T panel of (demeaned) percent log-returns. Columns are time points.
struct ReturnsPanel {
  Matrix values;  // m x T
  std::vector<std::string> series_labels;  // length m
  std::vector<std::string> date_labels;    // length T
  bool demeaned = false;

  int m() const { return static_cast<int>(values.rows()); }
  int T() const { return static_cast<int>(values.cols()); }

  void validate() const;
};

// m x r factor loadings. restricted = entries above the diagonal are pinned to zero.
struct LoadingsMatrix {
  Matrix entries;  // m x r
  bool restricted = false;

  int m() const { return static_cast<int>(entries.rows()); }
  int r() const { return static_cast<int>(entries.cols()); }
  // Number of free loadings in row i (0-based) under the restriction.
  int active_cols(int i) const { return restricted ? std::min(i + 1, r()) : r(); }

  void validate() const;
};

// Latent log-variance paths; column 0 holds the initial state h_{i0}.
struct LogVariancePaths {
  Matrix idio;     // m x (T+1)
  Matrix factor;   // r x (T+1)
};

// AR(1) parameters of one log-variance process. Factor processes have mu == 0.
struct SvParams {
  double mu = 0.0;
  double phi = 0.9;
  double sigma = 0.1;

  void validate() const {
    if (!(std::abs(phi) < 1.0)) throw domain_error("SvParams: |phi| must be < 1");
    if (!(sigma > 0.0)) throw domain_error("SvParams: sigma must be > 0");
  }
};

struct CovarianceAtTime {
  Matrix sigma;  // m x m, symmetric
  int t = -1;
};

}  // namespace fsv
