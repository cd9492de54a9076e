// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "qcov/bounds.hpp"
#include "qcov/montecarlo.hpp"
#include "qcov/testfuncs.hpp"

namespace qcov {

/// Unreadable or invalid configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full run configuration: shared [run] parameters plus per-command sections.
///
/// Per-command replica counts and test functions fall back to [run].
struct RunConfig {
  ExperimentConfig experiment;
  std::map<std::string, std::size_t> replicas;  // command -> N
  std::optional<TestFunction> mart_function;
  std::optional<TestFunction> verify_function;
  std::vector<double> bounds_epsilons;  // empty: use [run] epsilons
  double tails_prefactor = 1.0;         // scale of the theorem-shape overlay

  /// Config for one command with its overrides applied.
  [[nodiscard]] ExperimentConfig for_command(const std::string& command) const {
    ExperimentConfig cfg = experiment;
    if (auto it = replicas.find(command); it != replicas.end()) cfg.replicas = it->second;
    if (command == "mart" && mart_function) cfg.function = *mart_function;
    if (command == "verify" && verify_function) cfg.function = *verify_function;
    return cfg;
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string fmt_list(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    const std::string item = trim(text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (!item.empty()) out.push_back(item);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& text) {
  try {
    return parse_number(key, trim(text));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline std::size_t to_count(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!t.empty() && t[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' must be a nonnegative integer, got '" + t + "'");
  }
  if (used != t.size()) throw ConfigError("trailing characters in '" + key + "'");
  return static_cast<std::size_t>(v);
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(key, item));
  return out;
}

inline std::vector<std::size_t> to_counts(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split(text, ',')) out.push_back(to_count(key, item));
  return out;
}

inline TestFunction to_function(const std::string& key, const std::string& text) {
  try {
    return TestFunction::parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

/// "holder:alpha=..,mu=..", "lipschitz:mu=..", "explicit:0.4=2;0.2=4".
inline RateSchedule to_schedule(const std::string& text, double gamma) {
  const std::string t = trim(text);
  const auto colon = t.find(':');
  const std::string kind = trim(t.substr(0, colon));
  const std::string body = colon == std::string::npos ? std::string{} : t.substr(colon + 1);
  try {
    if (kind == "holder") {
      auto p = parse_params(body);
      const double alpha = take(p, "alpha");
      const double mu = take(p, "mu");
      reject_leftovers(p, "holder schedule");
      return RateSchedule::holder(alpha, mu, gamma);
    }
    if (kind == "lipschitz") {
      auto p = parse_params(body);
      const double mu = take(p, "mu");
      reject_leftovers(p, "lipschitz schedule");
      return RateSchedule::lipschitz(mu, gamma);
    }
    if (kind == "explicit") {
      std::map<double, std::size_t> table;
      for (const auto& item : split(body, ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("explicit schedule entries look like eps=n");
        table[to_double("schedule", item.substr(0, eq))] = to_count("schedule", item.substr(eq + 1));
      }
      return RateSchedule::explicit_table(std::move(table), gamma);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  throw ConfigError("unknown schedule kind '" + kind + "'");
}

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"seed", "T", "replicas", "refinement", "function", "schedule", "epsilons", "threshold", "gamma"}},
      {"tails", {"replicas", "prefactor"}},
      {"levy", {"replicas", "delta_eps", "threshold"}},
      {"beta", {"replicas", "cells", "refinements", "panel", "ks_samples"}},
      {"mart", {"replicas", "function", "epsilon", "cells", "multiples"}},
      {"supnorm", {"replicas", "cells", "thresholds", "probabilities"}},
      {"verify", {"function", "epsilon", "cells", "identity_paths", "panel", "tolerance"}},
      {"bounds", {"epsilons"}},
  };
  return keys;
}

}  // namespace detail

/// Reads a RunConfig from a section -> key -> value tree. Absent keys keep
/// their defaults; unknown sections or keys are errors.
inline RunConfig config_from_ptree(const boost::property_tree::ptree& tree) {
  using detail::to_count;
  using detail::to_counts;
  using detail::to_double;
  using detail::to_doubles;
  const auto& known = detail::known_keys();
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
  }
  auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
    if (auto s = tree.get_child_optional(section)) {
      if (auto v = s->get_optional<std::string>(key)) return *v;
    }
    return std::nullopt;
  };

  RunConfig rc;
  auto& e = rc.experiment;
  if (auto v = get("run", "seed")) e.seed = to_count("seed", *v);
  if (auto v = get("run", "T")) e.horizon = to_double("T", *v);
  if (auto v = get("run", "replicas")) e.replicas = to_count("replicas", *v);
  if (auto v = get("run", "refinement")) e.refinement = to_count("refinement", *v);
  if (auto v = get("run", "function")) e.function = detail::to_function("function", *v);
  if (auto v = get("run", "epsilons")) e.epsilons = to_doubles("epsilons", *v);
  if (auto v = get("run", "threshold")) e.threshold = to_double("threshold", *v);
  if (auto v = get("run", "gamma")) e.gamma = to_double("gamma", *v);
  if (auto v = get("run", "schedule")) {
    e.schedule = detail::to_schedule(*v, e.gamma);
  } else if (get("run", "gamma")) {
    e.schedule = detail::to_schedule(e.schedule.spec(), e.gamma);
  }

  for (const char* cmd : {"tails", "levy", "beta", "mart", "supnorm"}) {
    if (auto v = get(cmd, "replicas")) rc.replicas[cmd] = to_count(std::string(cmd) + ".replicas", *v);
  }
  if (auto v = get("tails", "prefactor")) rc.tails_prefactor = to_double("tails.prefactor", *v);

  if (auto v = get("levy", "delta_eps")) e.levy.delta_eps = to_doubles("levy.delta_eps", *v);
  if (auto v = get("levy", "threshold")) {
    if (detail::trim(*v) != "q") e.levy.threshold = to_double("levy.threshold", *v);
  }

  if (auto v = get("beta", "cells")) e.beta.cells = to_count("beta.cells", *v);
  if (auto v = get("beta", "refinements")) e.beta.refinements = to_counts("beta.refinements", *v);
  if (auto v = get("beta", "panel")) e.beta.panel = to_count("beta.panel", *v);
  if (auto v = get("beta", "ks_samples")) e.beta.ks_samples = to_count("beta.ks_samples", *v);

  if (auto v = get("mart", "function")) rc.mart_function = detail::to_function("mart.function", *v);
  if (auto v = get("mart", "epsilon")) e.martingale.epsilon = to_double("mart.epsilon", *v);
  if (auto v = get("mart", "cells")) e.martingale.cells = to_count("mart.cells", *v);
  if (auto v = get("mart", "multiples")) e.martingale.multiples = to_doubles("mart.multiples", *v);

  if (auto v = get("supnorm", "cells")) e.supnorm.cells = to_count("supnorm.cells", *v);
  if (auto v = get("supnorm", "thresholds")) e.supnorm.thresholds = to_doubles("supnorm.thresholds", *v);
  if (auto v = get("supnorm", "probabilities")) e.supnorm.probabilities = to_doubles("supnorm.probabilities", *v);

  if (auto v = get("verify", "function")) rc.verify_function = detail::to_function("verify.function", *v);
  if (auto v = get("verify", "epsilon")) e.consistency.epsilon = to_double("verify.epsilon", *v);
  if (auto v = get("verify", "cells")) e.consistency.cells = to_counts("verify.cells", *v);
  if (auto v = get("verify", "identity_paths")) e.consistency.identity_paths = to_count("verify.identity_paths", *v);
  if (auto v = get("verify", "panel")) e.consistency.panel = to_count("verify.panel", *v);
  if (auto v = get("verify", "tolerance")) e.consistency.tolerance = to_double("verify.tolerance", *v);

  if (auto v = get("bounds", "epsilons")) rc.bounds_epsilons = to_doubles("bounds.epsilons", *v);
  return rc;
}

/// Inverse of config_from_ptree; every parameter is written explicitly.
inline boost::property_tree::ptree config_to_ptree(const RunConfig& rc) {
  using detail::fmt_double;
  using detail::fmt_list;
  boost::property_tree::ptree t;
  const auto& e = rc.experiment;
  t.put("run.seed", std::to_string(e.seed));
  t.put("run.T", fmt_double(e.horizon));
  t.put("run.replicas", std::to_string(e.replicas));
  t.put("run.refinement", std::to_string(e.refinement));
  t.put("run.function", e.function.spec());
  t.put("run.schedule", e.schedule.spec());
  t.put("run.epsilons", fmt_list(e.epsilons));
  t.put("run.threshold", fmt_double(e.threshold));
  t.put("run.gamma", fmt_double(e.gamma));
  for (const auto& [cmd, n] : rc.replicas) t.put(cmd + ".replicas", std::to_string(n));
  t.put("tails.prefactor", fmt_double(rc.tails_prefactor));
  t.put("levy.delta_eps", fmt_list(e.levy.delta_eps));
  t.put("levy.threshold", e.levy.threshold ? fmt_double(*e.levy.threshold) : std::string("q"));
  t.put("beta.cells", std::to_string(e.beta.cells));
  t.put("beta.refinements", fmt_list(e.beta.refinements));
  t.put("beta.panel", std::to_string(e.beta.panel));
  t.put("beta.ks_samples", std::to_string(e.beta.ks_samples));
  if (rc.mart_function) t.put("mart.function", rc.mart_function->spec());
  t.put("mart.epsilon", fmt_double(e.martingale.epsilon));
  t.put("mart.cells", std::to_string(e.martingale.cells));
  t.put("mart.multiples", fmt_list(e.martingale.multiples));
  t.put("supnorm.cells", std::to_string(e.supnorm.cells));
  t.put("supnorm.thresholds", fmt_list(e.supnorm.thresholds));
  t.put("supnorm.probabilities", fmt_list(e.supnorm.probabilities));
  if (rc.verify_function) t.put("verify.function", rc.verify_function->spec());
  t.put("verify.epsilon", fmt_double(e.consistency.epsilon));
  t.put("verify.cells", fmt_list(e.consistency.cells));
  t.put("verify.identity_paths", std::to_string(e.consistency.identity_paths));
  t.put("verify.panel", std::to_string(e.consistency.panel));
  t.put("verify.tolerance", fmt_double(e.consistency.tolerance));
  if (!rc.bounds_epsilons.empty()) t.put("bounds.epsilons", fmt_list(rc.bounds_epsilons));
  return t;
}

/// Two-level {section: {key: "value"}} JSON echo of a config.
inline nlohmann::json config_to_json(const RunConfig& rc) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [section, body] : config_to_ptree(rc)) {
    for (const auto& [key, value] : body) out[section][key] = value.data();
  }
  return out;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config echo must be a JSON object");
  boost::property_tree::ptree t;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (!value.is_string()) throw ConfigError("config value " + section + "." + key + " must be a string");
      t.put(boost::property_tree::ptree::path_type(section + "." + key, '.'), value.get<std::string>());
    }
  }
  return config_from_ptree(t);
}

inline RunConfig parse_ini(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree t;
  try {
    boost::property_tree::ini_parser::read_ini(in, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  return config_from_ptree(t);
}

inline std::string to_ini(const RunConfig& rc) {
  std::ostringstream out;
  boost::property_tree::ini_parser::write_ini(out, config_to_ptree(rc));
  return out.str();
}

/// Loads an INI config, or the config echo of a run manifest (.json).
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    if (!j.contains("config")) throw ConfigError("manifest has no config echo");
    return config_from_json(j.at("config"));
  }
  return parse_ini(text);
}

}  // namespace qcov
