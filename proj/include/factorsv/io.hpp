#pragma once

#include <string>

#include "factorsv/gibbs.hpp"
#include "factorsv/predict.hpp"
#include "factorsv/simulate.hpp"
#include "factorsv/types.hpp"

namespace fsv {

// Rectangular CSV with a header row of series labels and a leading date
// column; malformed input errors name the offending line.
ReturnsPanel load_returns_csv(const std::string& path, bool demean);

// Full-precision (17 significant digits) writer; load(write(x)) is bit-exact.
void write_returns_csv(const ReturnsPanel& panel, const std::string& path);

Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Eigen::Ref<const Matrix>& mat, const std::string& path);

void write_pl_series_csv(const PlSeries& series, const std::string& path);
PlSeries read_pl_series_csv(const std::string& path);

// DrawStore directory format: meta.txt (config echo, shapes, fingerprints)
// plus per-quantity little-endian row-major float64 arrays. Round-trips are
// bit-exact.
void save_drawstore(const DrawStore& store, const std::string& dir);
DrawStore load_drawstore(const std::string& dir);

void save_ground_truth(const GroundTruth& truth, const std::string& dir);
GroundTruth load_ground_truth(const std::string& dir);

// 17-significant-digit rendering used by every text writer.
std::string format_double(double x);

}  // namespace fsv
