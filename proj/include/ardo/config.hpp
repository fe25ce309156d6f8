#pragma once

// Flat key = value run configuration with dotted keys. One setting per line,
// '#' starts a comment, blank lines are ignored.

#include "ardo/error.hpp"
#include "ardo/geometry.hpp"
#include "ardo/trainer.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ardo {

/// Malformed configuration: unknown key, bad value or unreadable file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string problem = "ou_stationary";
  int dim = 1;
  std::vector<Face> neumann_faces;
  TrainConfig train;

  PdeProblem make_problem() const { return builtin_problem(problem, dim, neumann_faces); }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("invalid number for '" + key + "': '" + v + "'");
  return d;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("invalid integer for '" + key + "': '" + v + "'");
  return i;
}

inline std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("invalid unsigned integer for '" + key + "': '" + v + "'");
  return u;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_unsigned(key, v));
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Faces are written as axis and side, e.g. "0+" or "1-".
inline std::vector<Face> to_faces(const std::string& key, const std::string& v) {
  std::vector<Face> faces;
  for (const std::string& item : split_list(v)) {
    const char sign = item.back();
    if (sign != '+' && sign != '-') throw ConfigError("invalid face for '" + key + "': '" + item + "'");
    faces.push_back({static_cast<int>(to_integer(key, item.substr(0, item.size() - 1))),
                     sign == '+' ? Side::upper : Side::lower});
  }
  return faces;
}

inline std::string number(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

template <class Fn>
auto wrap(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("invalid value for '" + key + "': " + e.what());
  }
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["problem.name"] = {[](RunConfig& c, const std::string& v) { c.problem = v; },
                         [](const RunConfig& c) { return c.problem; }};
    t["problem.dim"] = {[](RunConfig& c, const std::string& v) { c.dim = static_cast<int>(to_integer("problem.dim", v)); },
                        [](const RunConfig& c) { return std::to_string(c.dim); }};
    t["problem.neumann"] = {[](RunConfig& c, const std::string& v) { c.neumann_faces = to_faces("problem.neumann", v); },
                            [](const RunConfig& c) {
                              std::string s;
                              for (const Face& f : c.neumann_faces)
                                s += (s.empty() ? "" : ",") + std::to_string(f.axis) + (f.side == Side::upper ? "+" : "-");
                              return s;
                            }};
    t["train.epochs"] = {[](RunConfig& c, const std::string& v) { c.train.epochs = to_integer("train.epochs", v); },
                         [](const RunConfig& c) { return std::to_string(c.train.epochs); }};
    t["train.m_interior"] = {[](RunConfig& c, const std::string& v) { c.train.m_interior = to_count("train.m_interior", v); },
                             [](const RunConfig& c) { return std::to_string(c.train.m_interior); }};
    t["train.m_dirichlet"] = {
        [](RunConfig& c, const std::string& v) { c.train.m_dirichlet = to_count("train.m_dirichlet", v); },
        [](const RunConfig& c) { return std::to_string(c.train.m_dirichlet); }};
    t["train.m_neumann"] = {[](RunConfig& c, const std::string& v) { c.train.m_neumann = to_count("train.m_neumann", v); },
                            [](const RunConfig& c) { return std::to_string(c.train.m_neumann); }};
    t["train.tau"] = {[](RunConfig& c, const std::string& v) { c.train.tau = to_double("train.tau", v); },
                      [](const RunConfig& c) { return number(c.train.tau); }};
    t["train.tau_tilde"] = {[](RunConfig& c, const std::string& v) { c.train.tau_tilde = to_double("train.tau_tilde", v); },
                            [](const RunConfig& c) { return number(c.train.tau_tilde); }};
    t["train.replicates"] = {
        [](RunConfig& c, const std::string& v) { c.train.replicates = static_cast<int>(to_integer("train.replicates", v)); },
        [](const RunConfig& c) { return std::to_string(c.train.replicates); }};
    t["train.lr_solution"] = {
        [](RunConfig& c, const std::string& v) { c.train.lr_solution = to_double("train.lr_solution", v); },
        [](const RunConfig& c) { return number(c.train.lr_solution); }};
    t["train.lr_test"] = {[](RunConfig& c, const std::string& v) { c.train.lr_test = to_double("train.lr_test", v); },
                          [](const RunConfig& c) { return number(c.train.lr_test); }};
    t["train.test_steps_per_epoch"] = {
        [](RunConfig& c, const std::string& v) {
          c.train.test_steps_per_epoch = static_cast<int>(to_integer("train.test_steps_per_epoch", v));
        },
        [](const RunConfig& c) { return std::to_string(c.train.test_steps_per_epoch); }};
    t["train.loss_mode"] = {
        [](RunConfig& c, const std::string& v) { c.train.loss_mode = wrap("train.loss_mode", [&] { return parse_loss_mode(v); }); },
        [](const RunConfig& c) { return to_string(c.train.loss_mode); }};
    t["train.gradient"] = {[](RunConfig& c, const std::string& v) {
                             c.train.gradient = wrap("train.gradient", [&] { return parse_gradient_estimator(v); });
                           },
                           [](const RunConfig& c) { return to_string(c.train.gradient); }};
    t["train.seed"] = {[](RunConfig& c, const std::string& v) { c.train.seed = to_unsigned("train.seed", v); },
                       [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    t["train.eval_every"] = {[](RunConfig& c, const std::string& v) { c.train.eval_every = to_integer("train.eval_every", v); },
                             [](const RunConfig& c) { return std::to_string(c.train.eval_every); }};
    t["train.checkpoint_every"] = {
        [](RunConfig& c, const std::string& v) { c.train.checkpoint_every = to_integer("train.checkpoint_every", v); },
        [](const RunConfig& c) { return std::to_string(c.train.checkpoint_every); }};
    t["train.precision"] = {
        [](RunConfig& c, const std::string& v) { c.train.precision = wrap("train.precision", [&] { return parse_precision(v); }); },
        [](const RunConfig& c) { return to_string(c.train.precision); }};
    t["train.record_wall_clock"] = {
        [](RunConfig& c, const std::string& v) { c.train.record_wall_clock = to_bool("train.record_wall_clock", v); },
        [](const RunConfig& c) { return std::string(c.train.record_wall_clock ? "true" : "false"); }};
    t["net.hidden"] = {[](RunConfig& c, const std::string& v) {
                         std::vector<int> widths;
                         for (const std::string& w : split_list(v)) widths.push_back(static_cast<int>(to_integer("net.hidden", w)));
                         c.train.network.hidden = widths;
                       },
                       [](const RunConfig& c) {
                         std::string s;
                         for (int w : c.train.network.hidden) s += (s.empty() ? "" : ",") + std::to_string(w);
                         return s;
                       }};
    t["net.activation"] = {[](RunConfig& c, const std::string& v) {
                             c.train.network.activation = wrap("net.activation", [&] { return parse_activation(v); });
                           },
                           [](const RunConfig& c) { return to_string(c.train.network.activation); }};
    t["net.seed"] = {[](RunConfig& c, const std::string& v) { c.train.network.seed = to_unsigned("net.seed", v); },
                     [](const RunConfig& c) { return std::to_string(c.train.network.seed); }};
    return t;
  }();
  return table;
}

}  // namespace config_detail

/// Every recognized key, in sorted order.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : config_detail::fields()) keys.push_back(k);
  return keys;
}

/// Applies one `key=value` assignment.
inline void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = config_detail::fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(config, value);
}

/// Parses "key=value" (as given to --set).
inline void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key=value: '" + assignment + "'");
  apply_setting(config, config_detail::trim(assignment.substr(0, eq)), config_detail::trim(assignment.substr(eq + 1)));
}

/// Applies every setting of a config text on top of `config`.
inline void apply_config_text(RunConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key = value, got '" + line + "'");
    const std::string key = config_detail::trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key + "'");
    apply_setting(config, key, config_detail::trim(line.substr(eq + 1)));
  }
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig config;
  apply_config_text(config, buf.str());
  return config;
}

/// Checks cross-field constraints that single setters cannot see.
inline void validate_config(const RunConfig& config) {
  try {
    config.train.validate();
    (void)config.make_problem();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

/// Resolved configuration as ordered key/value pairs.
inline std::vector<std::pair<std::string, std::string>> resolved_settings(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, field] : config_detail::fields()) out.emplace_back(k, field.get(config));
  return out;
}

/// Config text that reproduces `config` exactly.
inline std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : resolved_settings(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ardo
