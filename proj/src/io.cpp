#include "factorsv/io.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "factorsv/detail/fnv.hpp"

namespace fsv {

namespace {

namespace fs = std::filesystem;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_doubles_le(std::ofstream& out, const double* p, std::size_t n) {
  static_assert(sizeof(double) == 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(8 * n));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &p[i], 8);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      out.write(buf, 8);
    }
  }
}

void read_doubles_le(std::ifstream& in, double* p, std::size_t n, const std::string& what) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(8 * n));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      char buf[8];
      in.read(buf, 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[b])) << (8 * b);
      std::memcpy(&p[i], &bits, 8);
    }
  }
  if (!in) throw parse_error(what + ": truncated binary array");
}

// One flat array per quantity, snapshots concatenated, row-major per snapshot.
void write_array_file(const fs::path& path, const std::vector<const Matrix*>& slices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw parse_error("cannot open " + path.string() + " for writing");
  for (const Matrix* m : slices) {
    RowMajorMatrix tmp = *m;
    write_doubles_le(out, tmp.data(), static_cast<std::size_t>(tmp.size()));
  }
}

std::vector<Matrix> read_array_file(const fs::path& path, int n, int rows, int cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open " + path.string());
  std::vector<Matrix> out;
  out.reserve(n);
  RowMajorMatrix tmp(rows, cols);
  for (int k = 0; k < n; ++k) {
    read_doubles_le(in, tmp.data(), static_cast<std::size_t>(tmp.size()), path.string());
    out.emplace_back(tmp);
  }
  char extra;
  if (in.read(&extra, 1)) throw parse_error(path.string() + ": trailing bytes");
  return out;
}

bool parse_double_strict(const std::string& token, double& value) {
  const char* begin = token.c_str();
  char* end = nullptr;
  value = std::strtod(begin, &end);
  return end != begin && *end == '\0' && !token.empty();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::map<std::string, std::string> read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

const std::string& meta_at(const std::map<std::string, std::string>& kv, const std::string& key,
                           const fs::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw parse_error(path.string() + ": missing key '" + key + "'");
  return it->second;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

ReturnsPanel load_returns_csv(const std::string& path, bool demean) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2) throw parse_error(path + ": header needs a date column and one series");
  const int m = static_cast<int>(header.size()) - 1;
  std::vector<std::string> series(header.begin() + 1, header.end());
  std::set<std::string> seen;
  for (int i = 0; i < m; ++i)
    if (!seen.insert(series[i]).second)
      throw parse_error(path + ": duplicate series label '" + series[i] + "'");

  std::vector<std::string> dates;
  std::vector<double> body;
  std::set<std::string> seen_dates;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != m + 1)
      throw parse_error(path + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " + std::to_string(m + 1));
    if (!seen_dates.insert(cells[0]).second)
      throw parse_error(path + ": line " + std::to_string(line_no) + ": duplicate date label '" +
                        cells[0] + "'");
    dates.push_back(cells[0]);
    for (int i = 0; i < m; ++i) {
      double v;
      if (!parse_double_strict(cells[i + 1], v))
        throw parse_error(path + ": line " + std::to_string(line_no) + ", column '" + series[i] +
                          "': cannot parse '" + cells[i + 1] + "'");
      body.push_back(v);
    }
  }
  const int T = static_cast<int>(dates.size());
  if (T < 2) throw parse_error(path + ": need at least two data rows");
  ReturnsPanel panel;
  panel.values.resize(m, T);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < m; ++i) panel.values(i, t) = body[static_cast<std::size_t>(t) * m + i];
  panel.series_labels = std::move(series);
  panel.date_labels = std::move(dates);
  if (demean) {
    for (int i = 0; i < m; ++i) panel.values.row(i).array() -= panel.values.row(i).mean();
    panel.demeaned = true;
  }
  panel.validate();
  return panel;
}

void write_returns_csv(const ReturnsPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot open " + path + " for writing");
  out << "date";
  for (int i = 0; i < panel.m(); ++i)
    out << ',' << (panel.series_labels.empty() ? "S" + std::to_string(i + 1)
                                               : panel.series_labels[i]);
  out << '\n';
  for (int t = 0; t < panel.T(); ++t) {
    out << (panel.date_labels.empty() ? std::to_string(t + 1) : panel.date_labels[t]);
    for (int i = 0; i < panel.m(); ++i) out << ',' << format_double(panel.values(i, t));
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    for (const auto& c : cells) {
      double v;
      if (!parse_double_strict(c, v))
        throw parse_error(path + ": line " + std::to_string(line_no) + ": cannot parse '" + c +
                          "'");
      row.push_back(v);
    }
    if (!rows.empty() && rows.front().size() != row.size())
      throw parse_error(path + ": line " + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw parse_error(path + ": empty matrix");
  Matrix out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j) out(i, j) = rows[i][j];
  return out;
}

void write_matrix_csv(const Eigen::Ref<const Matrix>& mat, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot open " + path + " for writing");
  for (int i = 0; i < mat.rows(); ++i) {
    for (int j = 0; j < mat.cols(); ++j) out << (j ? "," : "") << format_double(mat(i, j));
    out << '\n';
  }
}

void write_pl_series_csv(const PlSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot open " + path + " for writing");
  out << "date,log_pl\n";
  for (const auto& [d, v] : series.values) out << d << ',' << format_double(v) << '\n';
}

PlSeries read_pl_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  PlSeries out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("date", 0) == 0)) continue;
    const auto cells = split_csv_line(line);
    double d, v;
    if (cells.size() != 2 || !parse_double_strict(cells[0], d) || !parse_double_strict(cells[1], v))
      throw parse_error(path + ": line " + std::to_string(line_no) + ": expected 'date,value'");
    out.values.emplace_back(static_cast<int>(d), v);
  }
  return out;
}

void save_drawstore(const DrawStore& store, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path base(dir);
  const int n = static_cast<int>(store.snapshots.size());
  const int m = store.m, T = store.T, r = store.config.r;
  const int lam_len = n > 0 ? static_cast<int>(store.snapshots.front().shrinkage.lambda2.size()) : 0;

  auto collect = [&](auto select) {
    std::vector<const Matrix*> out;
    out.reserve(n);
    for (const auto& s : store.snapshots) out.push_back(select(s));
    return out;
  };
  write_array_file(base / "loadings.bin", collect([](const LatentState& s) { return &s.loadings.entries; }));
  write_array_file(base / "factors.bin", collect([](const LatentState& s) { return &s.factors; }));
  write_array_file(base / "h_idio.bin", collect([](const LatentState& s) { return &s.h.idio; }));
  write_array_file(base / "h_factor.bin", collect([](const LatentState& s) { return &s.h.factor; }));
  write_array_file(base / "tau2.bin", collect([](const LatentState& s) { return &s.shrinkage.tau2; }));

  {
    std::ofstream out(base / "sv_params.bin", std::ios::binary);
    for (const auto& s : store.snapshots) {
      for (const auto& p : s.theta_idio) {
        const double row[3] = {p.mu, p.phi, p.sigma};
        write_doubles_le(out, row, 3);
      }
      for (const auto& p : s.theta_factor) {
        const double row[3] = {p.mu, p.phi, p.sigma};
        write_doubles_le(out, row, 3);
      }
    }
  }
  {
    std::ofstream out(base / "lambda2.bin", std::ios::binary);
    for (const auto& s : store.snapshots)
      write_doubles_le(out, s.shrinkage.lambda2.data(), static_cast<std::size_t>(lam_len));
  }
  if (store.config.fixed_factors) {
    std::ofstream out(base / "fixed_factors.bin", std::ios::binary);
    RowMajorMatrix tmp = *store.config.fixed_factors;
    write_doubles_le(out, tmp.data(), static_cast<std::size_t>(tmp.size()));
  }

  std::ofstream meta(base / "meta.txt");
  meta << "format = factorsv-drawstore-v1\n";
  meta << "m = " << m << "\nT = " << T << "\nr = " << r << "\n";
  meta << "n_snapshots = " << n << "\n";
  meta << "n_draws = " << store.config.n_draws << "\nburn_in = " << store.config.burn_in
       << "\nthin = " << store.config.thin << "\n";
  meta << "restricted = " << (store.config.restricted_loadings ? 1 : 0) << "\n";
  meta << "seed = " << store.config.seed << "\nthreads = " << store.config.threads << "\n";
  meta << "variant = " << to_string(store.config.loadings_prior.variant) << "\n";
  meta << "tau2_fixed = " << format_double(store.config.loadings_prior.tau2_fixed) << "\n";
  meta << "a = " << format_double(store.config.loadings_prior.a)
       << "\nc = " << format_double(store.config.loadings_prior.c)
       << "\nd = " << format_double(store.config.loadings_prior.d) << "\n";
  auto dump_priors = [&meta](const char* tag, const SvPriors& p) {
    meta << tag << "_b_mu = " << format_double(p.b_mu) << "\n"
         << tag << "_B_mu = " << format_double(p.B_mu) << "\n"
         << tag << "_a0 = " << format_double(p.a0) << "\n"
         << tag << "_b0 = " << format_double(p.b0) << "\n"
         << tag << "_B_sigma = " << format_double(p.B_sigma) << "\n";
  };
  dump_priors("sv_idio", store.config.sv_priors_idio);
  dump_priors("sv_factor", store.config.sv_priors_factor);
  meta << "fixed_factors = " << (store.config.fixed_factors ? 1 : 0) << "\n";
  meta << "lambda2_len = " << lam_len << "\n";
  meta << "data_fingerprint = " << store.data_fingerprint << "\n";
  meta << "store_fingerprint = " << drawstore_fingerprint(store) << "\n";
  meta << "loadings.shape = " << n << ' ' << m << ' ' << r << "\n";
  meta << "factors.shape = " << n << ' ' << r << ' ' << T << "\n";
  meta << "h_idio.shape = " << n << ' ' << m << ' ' << T + 1 << "\n";
  meta << "h_factor.shape = " << n << ' ' << r << ' ' << T + 1 << "\n";
  meta << "sv_params.shape = " << n << ' ' << m + r << ' ' << 3 << "\n";
  meta << "tau2.shape = " << n << ' ' << m << ' ' << r << "\n";
  meta << "lambda2.shape = " << n << ' ' << lam_len << "\n";
}

DrawStore load_drawstore(const std::string& dir) {
  const fs::path base(dir);
  const auto kv = read_meta(base / "meta.txt");
  const fs::path meta_path = base / "meta.txt";
  if (meta_at(kv, "format", meta_path) != "factorsv-drawstore-v1")
    throw parse_error(dir + ": unknown store format");
  DrawStore store;
  store.m = std::stoi(meta_at(kv, "m", meta_path));
  store.T = std::stoi(meta_at(kv, "T", meta_path));
  store.config.r = std::stoi(meta_at(kv, "r", meta_path));
  const int n = std::stoi(meta_at(kv, "n_snapshots", meta_path));
  store.config.n_draws = std::stoi(meta_at(kv, "n_draws", meta_path));
  store.config.burn_in = std::stoi(meta_at(kv, "burn_in", meta_path));
  store.config.thin = std::stoi(meta_at(kv, "thin", meta_path));
  store.config.restricted_loadings = meta_at(kv, "restricted", meta_path) == "1";
  store.config.seed = std::stoull(meta_at(kv, "seed", meta_path));
  store.config.threads = std::stoi(meta_at(kv, "threads", meta_path));
  store.config.loadings_prior.variant =
      loadings_prior_variant_from_string(meta_at(kv, "variant", meta_path));
  store.config.loadings_prior.tau2_fixed = std::stod(meta_at(kv, "tau2_fixed", meta_path));
  store.config.loadings_prior.a = std::stod(meta_at(kv, "a", meta_path));
  store.config.loadings_prior.c = std::stod(meta_at(kv, "c", meta_path));
  store.config.loadings_prior.d = std::stod(meta_at(kv, "d", meta_path));
  auto load_priors = [&](const char* tag, SvPriors& p) {
    p.b_mu = std::stod(meta_at(kv, std::string(tag) + "_b_mu", meta_path));
    p.B_mu = std::stod(meta_at(kv, std::string(tag) + "_B_mu", meta_path));
    p.a0 = std::stod(meta_at(kv, std::string(tag) + "_a0", meta_path));
    p.b0 = std::stod(meta_at(kv, std::string(tag) + "_b0", meta_path));
    p.B_sigma = std::stod(meta_at(kv, std::string(tag) + "_B_sigma", meta_path));
  };
  load_priors("sv_idio", store.config.sv_priors_idio);
  load_priors("sv_factor", store.config.sv_priors_factor);
  store.data_fingerprint = std::stoull(meta_at(kv, "data_fingerprint", meta_path));
  const int lam_len = std::stoi(meta_at(kv, "lambda2_len", meta_path));
  const int m = store.m, T = store.T, r = store.config.r;

  if (meta_at(kv, "fixed_factors", meta_path) == "1") {
    std::ifstream in(base / "fixed_factors.bin", std::ios::binary);
    if (!in) throw parse_error(dir + ": missing fixed_factors.bin");
    RowMajorMatrix tmp(r, T);
    read_doubles_le(in, tmp.data(), static_cast<std::size_t>(tmp.size()), "fixed_factors.bin");
    store.config.fixed_factors = Matrix(tmp);
  }

  auto loadings = read_array_file(base / "loadings.bin", n, m, r);
  auto factors = read_array_file(base / "factors.bin", n, r, T);
  auto h_idio = read_array_file(base / "h_idio.bin", n, m, T + 1);
  auto h_factor = read_array_file(base / "h_factor.bin", n, r, T + 1);
  auto tau2 = read_array_file(base / "tau2.bin", n, m, r);
  auto sv_params = read_array_file(base / "sv_params.bin", n, m + r, 3);
  auto lambda2 = read_array_file(base / "lambda2.bin", n, lam_len == 0 ? 0 : 1,
                                 lam_len);

  store.snapshots.resize(n);
  for (int k = 0; k < n; ++k) {
    LatentState& s = store.snapshots[k];
    s.loadings.entries = std::move(loadings[k]);
    s.loadings.restricted = store.config.restricted_loadings;
    s.factors = std::move(factors[k]);
    s.h.idio = std::move(h_idio[k]);
    s.h.factor = std::move(h_factor[k]);
    s.theta_idio.resize(m);
    s.theta_factor.resize(r);
    for (int i = 0; i < m; ++i)
      s.theta_idio[i] = SvParams{sv_params[k](i, 0), sv_params[k](i, 1), sv_params[k](i, 2)};
    for (int j = 0; j < r; ++j)
      s.theta_factor[j] =
          SvParams{sv_params[k](m + j, 0), sv_params[k](m + j, 1), sv_params[k](m + j, 2)};
    s.shrinkage.tau2 = std::move(tau2[k]);
    s.shrinkage.lambda2 = lam_len == 0 ? Vector() : Vector(lambda2[k].row(0).transpose());
  }
  const auto expect = std::stoull(meta_at(kv, "store_fingerprint", meta_path));
  if (drawstore_fingerprint(store) != expect)
    throw parse_error(dir + ": store fingerprint mismatch (corrupt or edited store)");
  return store;
}

void save_ground_truth(const GroundTruth& truth, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path base(dir);
  write_returns_csv(truth.data, (base / "returns.csv").string());
  write_matrix_csv(truth.loadings.entries, (base / "loadings.csv").string());
  {
    std::ofstream out(base / "sv_params.csv");
    out << "block,mu,phi,sigma\n";
    for (std::size_t i = 0; i < truth.theta_idio.size(); ++i)
      out << "I" << i + 1 << ',' << format_double(truth.theta_idio[i].mu) << ','
          << format_double(truth.theta_idio[i].phi) << ','
          << format_double(truth.theta_idio[i].sigma) << '\n';
    for (std::size_t j = 0; j < truth.theta_factor.size(); ++j)
      out << "F" << j + 1 << ',' << format_double(truth.theta_factor[j].mu) << ','
          << format_double(truth.theta_factor[j].phi) << ','
          << format_double(truth.theta_factor[j].sigma) << '\n';
  }
  const int m = truth.data.m(), T = truth.data.T();
  const int r = truth.loadings.r();
  write_array_file(base / "h_idio.bin", {&truth.h.idio});
  write_array_file(base / "h_factor.bin", {&truth.h.factor});
  write_array_file(base / "factors.bin", {&truth.factors});
  std::ofstream meta(base / "meta.txt");
  meta << "format = factorsv-truth-v1\n";
  meta << "m = " << m << "\nT = " << T << "\nr = " << r << "\n";
  meta << "restricted = " << (truth.loadings.restricted ? 1 : 0) << "\n";
}

GroundTruth load_ground_truth(const std::string& dir) {
  const fs::path base(dir);
  const auto kv = read_meta(base / "meta.txt");
  const fs::path meta_path = base / "meta.txt";
  if (meta_at(kv, "format", meta_path) != "factorsv-truth-v1")
    throw parse_error(dir + ": unknown truth format");
  const int m = std::stoi(meta_at(kv, "m", meta_path));
  const int T = std::stoi(meta_at(kv, "T", meta_path));
  const int r = std::stoi(meta_at(kv, "r", meta_path));
  GroundTruth truth;
  truth.data = load_returns_csv((base / "returns.csv").string(), false);
  detail::require(truth.data.m() == m && truth.data.T() == T, dir + ": data shape mismatch");
  truth.loadings.entries = read_matrix_csv((base / "loadings.csv").string());
  truth.loadings.restricted = meta_at(kv, "restricted", meta_path) == "1";
  truth.h.idio = read_array_file(base / "h_idio.bin", 1, m, T + 1).front();
  truth.h.factor = read_array_file(base / "h_factor.bin", 1, r, T + 1).front();
  truth.factors = read_array_file(base / "factors.bin", 1, r, T).front();
  {
    std::ifstream in(base / "sv_params.csv");
    if (!in) throw parse_error(dir + ": missing sv_params.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != 4) throw parse_error(dir + ": malformed sv_params.csv");
      SvParams p{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
      if (cells[0][0] == 'I')
        truth.theta_idio.push_back(p);
      else
        truth.theta_factor.push_back(p);
    }
  }
  detail::require(static_cast<int>(truth.theta_idio.size()) == m &&
                      static_cast<int>(truth.theta_factor.size()) == r,
                  dir + ": sv_params.csv row count mismatch");
  return truth;
}

}  // namespace fsv
