#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/model.hpp"
#include "mkv/planner.hpp"

namespace mkv {

// Flat sectioned key=value experiment description. Field names mirror the
// usual symbols (t, n, N, M, alpha, beta, epsilon, lambda).
//
//   [model]
//   name = linear
//   alpha = 1.0
//   beta = 0.5
//   kernel = pairwise          # pairwise | feature
//   initial = point            # point | gaussian | file
//   x0 = 1.0
//   mean = 0.0
//   cov = 1.0
//   path = samples.txt
//
//   [dynamics]
//   kind = ips                 # ips | self
//   t = 10
//   n = 20
//   N = 50
//   M = 1
//   schedule = constant        # constant | harmonic
//   burn_in = 0
//
//   [estimator]
//   algorithm = mca            # ea | mca | aea | c-aea | es-aea | cs-aea
//   observable = x2            # x | x2 | coord:<j> | poly:<c0,c1,...>
//
//   [execution]
//   seed = 1
//   replications = 1
//   workers = 1
//   output = out
//   dump_trajectory = false
//   zero_timings = true
//   reference = auto           # auto | none | <number>
//
//   [planner]                  # overrides explicit t/n/N/M when present
//   epsilon = 0.2
//   lambda = 0.5
//   cost_constant = 1.0
struct ExperimentConfig {
  // model
  std::string model_name = "linear";
  double alpha = 1.0;
  double beta = 0.5;
  std::string kernel_style = "pairwise";
  std::string initial_kind = "point";
  double x0 = 1.0;
  double initial_mean = 0.0;
  double initial_cov = 1.0;
  std::string initial_path;
  // dynamics
  std::string dynamics_kind;  // derived from the algorithm when empty
  std::optional<double> t;
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> N;
  std::uint64_t M = 1;
  std::string schedule = "constant";
  double burn_in = 0.0;
  // estimator
  Algorithm algorithm = Algorithm::MCA;
  std::string observable = "x2";
  // execution
  std::uint64_t seed = 1;
  std::uint64_t replications = 1;
  std::uint64_t workers = 1;
  std::string output = "out";
  bool dump_trajectory = false;
  bool zero_timings = true;
  std::string reference = "auto";
  // planner
  std::optional<double> epsilon;
  std::optional<double> lambda;
  double cost_constant = 1.0;

  bool uses_planner() const { return epsilon.has_value(); }

  bool self_dynamics() const {
    if (!dynamics_kind.empty()) return dynamics_kind == "self";
    return algorithm == Algorithm::ES_AEA || algorithm == Algorithm::CS_AEA;
  }
};

namespace detail {

struct IniData {
  // (section, key) -> value, plus insertion order for error reporting
  std::map<std::pair<std::string, std::string>, std::string> values;
};

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline IniData parse_ini(std::istream& in, std::vector<std::string>& errors) {
  IniData data;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back("line " + std::to_string(lineno) +
                         ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!data.values.emplace(std::make_pair(section, key), value).second)
      errors.push_back("duplicate key " + section + "." + key);
  }
  return data;
}

class ConfigReader {
 public:
  ConfigReader(IniData data, std::vector<std::string>& errors)
      : data_(std::move(data)), errors_(errors) {}

  std::optional<std::string> raw(const std::string& section,
                                 const std::string& key) {
    auto it = data_.values.find({section, key});
    if (it == data_.values.end()) return std::nullopt;
    seen_.insert({section, key});
    return it->second;
  }

  void get(const std::string& s, const std::string& k, std::string& out) {
    if (auto v = raw(s, k)) out = *v;
  }

  void get(const std::string& s, const std::string& k, double& out) {
    if (auto v = raw(s, k)) parse_double(s, k, *v, out);
  }

  void get(const std::string& s, const std::string& k,
           std::optional<double>& out) {
    if (auto v = raw(s, k)) {
      double tmp = 0.0;
      if (parse_double(s, k, *v, tmp)) out = tmp;
    }
  }

  void get(const std::string& s, const std::string& k, std::uint64_t& out) {
    if (auto v = raw(s, k)) parse_u64(s, k, *v, out);
  }

  void get(const std::string& s, const std::string& k,
           std::optional<std::uint64_t>& out) {
    if (auto v = raw(s, k)) {
      std::uint64_t tmp = 0;
      if (parse_u64(s, k, *v, tmp)) out = tmp;
    }
  }

  void get(const std::string& s, const std::string& k, bool& out) {
    if (auto v = raw(s, k)) {
      if (*v == "true" || *v == "1")
        out = true;
      else if (*v == "false" || *v == "0")
        out = false;
      else
        errors_.push_back(s + "." + k + ": expected boolean, got '" + *v + "'");
    }
  }

  void report_unknown() {
    for (const auto& [sk, value] : data_.values)
      if (!seen_.count(sk))
        errors_.push_back("unknown field " + sk.first + "." + sk.second);
  }

 private:
  bool parse_double(const std::string& s, const std::string& k,
                    const std::string& v, double& out) {
    try {
      std::size_t pos = 0;
      out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return true;
    } catch (const std::exception&) {
      errors_.push_back(s + "." + k + ": expected number, got '" + v + "'");
      return false;
    }
  }

  bool parse_u64(const std::string& s, const std::string& k,
                 const std::string& v, std::uint64_t& out) {
    try {
      std::size_t pos = 0;
      const long long parsed = std::stoll(v, &pos);
      if (pos != v.size() || parsed < 0) throw std::invalid_argument(v);
      out = static_cast<std::uint64_t>(parsed);
      return true;
    } catch (const std::exception&) {
      errors_.push_back(s + "." + k + ": expected nonnegative integer, got '" +
                        v + "'");
      return false;
    }
  }

  IniData data_;
  std::vector<std::string>& errors_;
  std::set<std::pair<std::string, std::string>> seen_;
};

}  // namespace detail

inline Observable observable_from_name(const std::string& name) {
  if (name == "x" || name == "coord:0") return coordinate_observable(0);
  if (name == "x2" || name == "squared_norm") return squared_norm_observable();
  if (name.rfind("coord:", 0) == 0)
    return coordinate_observable(std::stoul(name.substr(6)));
  if (name.rfind("poly:", 0) == 0) {
    std::vector<double> coeffs;
    std::stringstream ss(name.substr(5));
    std::string item;
    while (std::getline(ss, item, ',')) coeffs.push_back(std::stod(item));
    if (coeffs.empty()) throw ConfigError("observable poly: no coefficients");
    return polynomial_observable(std::move(coeffs));
  }
  throw ConfigError("unknown observable: " + name);
}

inline ExperimentConfig validate_config(detail::IniData data) {
  std::vector<std::string> errors;
  detail::ConfigReader reader(std::move(data), errors);
  ExperimentConfig cfg;

  reader.get("model", "name", cfg.model_name);
  reader.get("model", "alpha", cfg.alpha);
  reader.get("model", "beta", cfg.beta);
  reader.get("model", "kernel", cfg.kernel_style);
  reader.get("model", "initial", cfg.initial_kind);
  reader.get("model", "x0", cfg.x0);
  reader.get("model", "mean", cfg.initial_mean);
  reader.get("model", "cov", cfg.initial_cov);
  reader.get("model", "path", cfg.initial_path);

  reader.get("dynamics", "kind", cfg.dynamics_kind);
  reader.get("dynamics", "t", cfg.t);
  reader.get("dynamics", "n", cfg.n);
  reader.get("dynamics", "N", cfg.N);
  reader.get("dynamics", "M", cfg.M);
  reader.get("dynamics", "schedule", cfg.schedule);
  reader.get("dynamics", "burn_in", cfg.burn_in);

  std::string algorithm_name_str;
  reader.get("estimator", "algorithm", algorithm_name_str);
  reader.get("estimator", "observable", cfg.observable);

  reader.get("execution", "seed", cfg.seed);
  reader.get("execution", "replications", cfg.replications);
  reader.get("execution", "workers", cfg.workers);
  reader.get("execution", "output", cfg.output);
  reader.get("execution", "dump_trajectory", cfg.dump_trajectory);
  reader.get("execution", "zero_timings", cfg.zero_timings);
  reader.get("execution", "reference", cfg.reference);

  reader.get("planner", "epsilon", cfg.epsilon);
  reader.get("planner", "lambda", cfg.lambda);
  reader.get("planner", "cost_constant", cfg.cost_constant);

  reader.report_unknown();

  if (!algorithm_name_str.empty()) {
    try {
      cfg.algorithm = algorithm_from_name(algorithm_name_str);
    } catch (const ConfigError& e) {
      errors.emplace_back(e.what());
    }
  }
  try {
    (void)observable_from_name(cfg.observable);
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }

  if (cfg.model_name != "linear")
    errors.push_back("model.name: only 'linear' is built in, got '" +
                     cfg.model_name + "'");
  else if (!(cfg.alpha > cfg.beta) || !(cfg.alpha > 0.0))
    errors.push_back(
        "model: ergodicity requires alpha > beta and alpha > 0 (alpha=" +
        std::to_string(cfg.alpha) + ", beta=" + std::to_string(cfg.beta) + ")");
  if (cfg.kernel_style != "pairwise" && cfg.kernel_style != "feature")
    errors.push_back("model.kernel: must be 'pairwise' or 'feature'");
  if (cfg.initial_kind != "point" && cfg.initial_kind != "gaussian" &&
      cfg.initial_kind != "file")
    errors.push_back("model.initial: must be point, gaussian, or file");
  if (cfg.initial_kind == "file" && cfg.initial_path.empty())
    errors.push_back("model.path: required for initial = file");

  const bool has_explicit =
      cfg.t.has_value() || cfg.n.has_value() || cfg.N.has_value();
  if (cfg.uses_planner() && has_explicit)
    errors.push_back(
        "conflicting sections: planner.epsilon and explicit dynamics.t/n/N "
        "both set; choose one");
  if (!cfg.uses_planner() &&
      !(cfg.t.has_value() && cfg.n.has_value() && cfg.N.has_value()))
    errors.push_back(
        "missing parameters: set dynamics.t, dynamics.n, dynamics.N or "
        "planner.epsilon");
  if (cfg.uses_planner() && !cfg.lambda.has_value() &&
      (cfg.algorithm != Algorithm::AEA && cfg.algorithm != Algorithm::EA))
    errors.push_back("planner.lambda: required for this algorithm");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0 && *cfg.epsilon < 1.0))
    errors.push_back("planner.epsilon: must lie in (0, 1)");
  if (cfg.lambda && !(*cfg.lambda > 0.0))
    errors.push_back("planner.lambda: must be > 0");
  if (!cfg.dynamics_kind.empty() && cfg.dynamics_kind != "ips" &&
      cfg.dynamics_kind != "self")
    errors.push_back("dynamics.kind: must be 'ips' or 'self'");
  if (cfg.schedule != "constant" && cfg.schedule != "harmonic")
    errors.push_back("dynamics.schedule: must be 'constant' or 'harmonic'");
  if (cfg.schedule == "harmonic" && !cfg.self_dynamics())
    errors.push_back("dynamics.schedule: harmonic requires self dynamics");
  const bool wants_self = cfg.algorithm == Algorithm::ES_AEA ||
                          cfg.algorithm == Algorithm::CS_AEA;
  if (!cfg.dynamics_kind.empty() && wants_self && cfg.dynamics_kind != "self")
    errors.push_back("estimator/dynamics mismatch: " +
                     std::string(algorithm_name(cfg.algorithm)) +
                     " requires dynamics.kind = self");
  if (cfg.burn_in < 0.0) errors.push_back("dynamics.burn_in: must be >= 0");
  if (cfg.M < 1) errors.push_back("dynamics.M: must be >= 1");
  if (cfg.workers < 1) errors.push_back("execution.workers: must be >= 1");
  if (cfg.replications < 1)
    errors.push_back("execution.replications: must be >= 1");
  if (cfg.reference != "auto" && cfg.reference != "none") {
    try {
      (void)std::stod(cfg.reference);
    } catch (const std::exception&) {
      errors.push_back("execution.reference: must be auto, none, or a number");
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::vector<std::string> errors;
  detail::IniData data = detail::parse_ini(in, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return validate_config(std::move(data));
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> errors;
  detail::IniData data = detail::parse_ini(in, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return validate_config(std::move(data));
}

}  // namespace mkv
