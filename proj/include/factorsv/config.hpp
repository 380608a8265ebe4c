#pragma once

#include <map>
#include <string>

#include "factorsv/gibbs.hpp"

namespace fsv {

// Declarative run configuration: [section] headers with key = value lines,
// '#' comments. Flag overrides are applied by the CLI on top.
class Config {
 public:
  Config() = default;
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  void set(const std::string& section, const std::string& key, const std::string& value);
  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Named loadings-prior presets: gaussian, lasso-row, lasso-col, ng-row, ng-col.
LoadingsPriorConfig loadings_prior_preset(const std::string& name);

// Chain configuration from a config file; unset keys keep the defaults.
ChainConfig chain_config_from(const Config& cfg);

// Canonical echo of a resolved configuration, itself parseable.
std::string render_chain_config(const ChainConfig& cfg);

}  // namespace fsv
