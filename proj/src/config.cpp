#include "factorsv/config.hpp"

#include <fstream>
#include <sstream>

#include "factorsv/io.hpp"

namespace fsv {

namespace {
std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}
}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stod(get_string(section, key, ""));
  } catch (...) {
    throw config_error("config [" + section + "] " + key + ": not a number");
  }
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoi(get_string(section, key, ""));
  } catch (...) {
    throw config_error("config [" + section + "] " + key + ": not an integer");
  }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw config_error("config [" + section + "] " + key + ": not a boolean");
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoull(get_string(section, key, ""));
  } catch (...) {
    throw config_error("config [" + section + "] " + key + ": not an unsigned integer");
  }
}

LoadingsPriorConfig loadings_prior_preset(const std::string& name) {
  LoadingsPriorConfig out;
  if (name == "gaussian") {
    out.variant = LoadingsPriorVariant::fixed_gaussian;
    out.tau2_fixed = 1.0;
  } else if (name == "lasso-row") {
    out.variant = LoadingsPriorVariant::normal_gamma_rowwise;
    out.a = 1.0;
    out.c = out.d = 0.001;
  } else if (name == "lasso-col") {
    out.variant = LoadingsPriorVariant::normal_gamma_columnwise;
    out.a = 1.0;
    out.c = out.d = 0.001;
  } else if (name == "ng-row") {
    out.variant = LoadingsPriorVariant::normal_gamma_rowwise;
    out.a = 0.1;
    out.c = out.d = 0.001;
  } else if (name == "ng-col") {
    out.variant = LoadingsPriorVariant::normal_gamma_columnwise;
    out.a = 0.1;
    out.c = out.d = 0.001;
  } else {
    throw config_error("unknown prior preset '" + name +
                       "' (know: gaussian, lasso-row, lasso-col, ng-row, ng-col)");
  }
  return out;
}

ChainConfig chain_config_from(const Config& cfg) {
  ChainConfig out;
  out.r = cfg.get_int("chain", "factors", out.r);
  out.n_draws = cfg.get_int("chain", "draws", out.n_draws);
  out.burn_in = cfg.get_int("chain", "burnin", out.burn_in);
  out.thin = cfg.get_int("chain", "thin", out.thin);
  out.restricted_loadings = cfg.get_bool("chain", "restricted", out.restricted_loadings);
  out.seed = cfg.get_u64("chain", "seed", out.seed);
  out.threads = cfg.get_int("chain", "threads", out.threads);

  if (cfg.has("prior", "preset")) out.loadings_prior = loadings_prior_preset(cfg.get_string("prior", "preset", ""));
  if (cfg.has("prior", "variant"))
    out.loadings_prior.variant =
        loadings_prior_variant_from_string(cfg.get_string("prior", "variant", ""));
  out.loadings_prior.tau2_fixed = cfg.get_double("prior", "tau2", out.loadings_prior.tau2_fixed);
  out.loadings_prior.a = cfg.get_double("prior", "a", out.loadings_prior.a);
  out.loadings_prior.c = cfg.get_double("prior", "c", out.loadings_prior.c);
  out.loadings_prior.d = cfg.get_double("prior", "d", out.loadings_prior.d);

  auto read_priors = [&cfg](const std::string& section, SvPriors& p) {
    p.b_mu = cfg.get_double(section, "b_mu", p.b_mu);
    p.B_mu = cfg.get_double(section, "B_mu", p.B_mu);
    p.a0 = cfg.get_double(section, "a0", p.a0);
    p.b0 = cfg.get_double(section, "b0", p.b0);
    p.B_sigma = cfg.get_double(section, "B_sigma", p.B_sigma);
  };
  read_priors("sv_idio", out.sv_priors_idio);
  read_priors("sv_factor", out.sv_priors_factor);
  return out;
}

std::string render_chain_config(const ChainConfig& cfg) {
  std::ostringstream out;
  out << "[chain]\n";
  out << "factors = " << cfg.r << "\n";
  out << "draws = " << cfg.n_draws << "\n";
  out << "burnin = " << cfg.burn_in << "\n";
  out << "thin = " << cfg.thin << "\n";
  out << "restricted = " << (cfg.restricted_loadings ? "true" : "false") << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "threads = " << cfg.threads << "\n";
  out << "fixed_factors = " << (cfg.fixed_factors ? "true" : "false") << "\n";
  out << "[prior]\n";
  out << "variant = " << to_string(cfg.loadings_prior.variant) << "\n";
  if (cfg.loadings_prior.variant == LoadingsPriorVariant::fixed_gaussian) {
    out << "tau2 = " << format_double(cfg.loadings_prior.tau2_fixed) << "\n";
  } else {
    out << "a = " << format_double(cfg.loadings_prior.a) << "\n";
    out << "c = " << format_double(cfg.loadings_prior.c) << "\n";
    out << "d = " << format_double(cfg.loadings_prior.d) << "\n";
  }
  auto dump = [&out](const char* name, const SvPriors& p) {
    out << "[" << name << "]\n";
    out << "b_mu = " << format_double(p.b_mu) << "\n";
    out << "B_mu = " << format_double(p.B_mu) << "\n";
    out << "a0 = " << format_double(p.a0) << "\n";
    out << "b0 = " << format_double(p.b0) << "\n";
    out << "B_sigma = " << format_double(p.B_sigma) << "\n";
  };
  dump("sv_idio", cfg.sv_priors_idio);
  dump("sv_factor", cfg.sv_priors_factor);
  return out.str();
}

}  // namespace fsv
