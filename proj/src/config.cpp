#include "pdfest/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pdfest {

namespace {

using KeyValues = std::map<std::string, std::string>;  // "section.key" -> value

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

KeyValues parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  KeyValues kv;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("load_config: malformed section at " + path + ":" +
                                 std::to_string(line_no));
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw std::runtime_error("load_config: expected 'key = value' at " + path + ":" +
                               std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    kv[section + "." + key] = value;
  }
  return kv;
}

class Extractor {
 public:
  explicit Extractor(KeyValues kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) {
    return parse_double(key, str(key, ""), fallback);
  }

  int integer(const std::string& key, int fallback) {
    const std::string v = str(key, "");
    if (v.empty()) return fallback;
    try {
      return std::stoi(v);
    } catch (...) {
      throw std::runtime_error("load_config: key '" + key + "' is not an integer: " + v);
    }
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    const std::string v = str(key, "");
    if (v.empty()) return fallback;
    try {
      return std::stoull(v);
    } catch (...) {
      throw std::runtime_error("load_config: key '" + key + "' is not an unsigned integer: " + v);
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    const std::string v = str(key, "");
    if (v.empty()) return fallback;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("load_config: key '" + key + "' is not a boolean: " + v);
  }

  std::vector<double> num_list(const std::string& key) {
    const std::string v = str(key, "");
    std::vector<double> out;
    std::istringstream stream(v);
    std::string tok;
    while (stream >> tok) out.push_back(parse_double(key, tok, 0.0));
    return out;
  }

  std::vector<int> int_list(const std::string& key) {
    const std::string v = str(key, "");
    std::vector<int> out;
    std::istringstream stream(v);
    std::string tok;
    while (stream >> tok) {
      try {
        out.push_back(std::stoi(tok));
      } catch (...) {
        throw std::runtime_error("load_config: key '" + key + "' has a non-integer entry: " + tok);
      }
    }
    return out;
  }

  void check_all_consumed() const {
    for (const auto& [key, value] : kv_)
      if (!consumed_.count(key))
        throw std::runtime_error("load_config: unknown key '" + key + "'");
  }

  const KeyValues& raw() const { return kv_; }

 private:
  static double parse_double(const std::string& key, const std::string& v, double fallback) {
    if (v.empty()) return fallback;
    try {
      std::size_t pos = 0;
      const double parsed = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return parsed;
    } catch (...) {
      throw std::runtime_error("load_config: key '" + key + "' is not a number: " + v);
    }
  }

  KeyValues kv_;
  std::set<std::string> consumed_;
};

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

int ExperimentConfig::stochastic_dimension() const {
  if (model_kind == ModelKind::Ridge) return ridge_dimension;
  int d = 0;
  for (std::size_t g = 0; g < kl_terms.size(); ++g)
    if (injection_std.size() > g && injection_std[g] > 0.0) d += kl_terms[g];
  return d;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  KeyValues kv = parse_file(path);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || item.find('.') == std::string::npos || eq < item.find('.'))
      throw std::runtime_error("load_config: overrides take the form section.key=value: " + item);
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }

  Extractor ex(std::move(kv));
  ExperimentConfig cfg;

  const std::string kind = ex.str("model.kind", "grid");
  if (kind == "grid")
    cfg.model_kind = ModelKind::Grid;
  else if (kind == "ridge")
    cfg.model_kind = ModelKind::Ridge;
  else
    throw std::runtime_error("load_config: model.kind must be grid or ridge");

  cfg.grid_data = ex.str("model.grid_data", "");
  cfg.ridge_dimension = ex.integer("model.dimension", cfg.ridge_dimension);
  cfg.ridge_direction_seed = ex.u64("model.direction_seed", cfg.ridge_direction_seed);

  cfg.injection_mean = ex.num_list("injections.mean");
  cfg.injection_std = ex.num_list("injections.std");
  cfg.correlation_length = ex.num("injections.correlation_length", cfg.correlation_length);
  cfg.kl_terms = ex.int_list("injections.kl_terms");
  cfg.kl_quadrature = ex.integer("injections.kl_quadrature", cfg.kl_quadrature);
  cfg.sigma_in_log_space = ex.boolean("injections.sigma_in_log_space", cfg.sigma_in_log_space);

  if (ex.has("fault.bus")) cfg.fault_bus = ex.integer("fault.bus", 0);
  cfg.fault_t_on = ex.num("fault.t_on", cfg.fault_t_on);
  cfg.fault_duration = ex.num("fault.duration", cfg.fault_duration);

  cfg.t_max = ex.num("simulation.t_max", cfg.t_max);
  cfg.dt = ex.num("simulation.dt", cfg.dt);
  const std::string diverge = ex.str("simulation.on_divergence", "abort");
  if (diverge == "abort")
    cfg.on_divergence = DivergencePolicy::Abort;
  else if (diverge == "exclude")
    cfg.on_divergence = DivergencePolicy::Exclude;
  else
    throw std::runtime_error("load_config: simulation.on_divergence must be abort or exclude");

  const std::string qoi = ex.str("qoi.kind", "relative_speed");
  if (qoi == "relative_speed")
    cfg.qoi_kind = QoiKind::RelativeSpeed;
  else if (qoi == "bus_voltage")
    cfg.qoi_kind = QoiKind::BusVoltage;
  else
    throw std::runtime_error("load_config: qoi.kind must be relative_speed or bus_voltage");
  cfg.qoi_generator = ex.integer("qoi.generator", cfg.qoi_generator);
  cfg.qoi_reference = ex.integer("qoi.reference", cfg.qoi_reference);

  cfg.training_samples = ex.integer("fit.training_samples", cfg.training_samples);
  cfg.polynomial_order = ex.integer("fit.polynomial_order", cfg.polynomial_order);
  cfg.rotation_iterations = ex.integer("fit.rotation_iterations", cfg.rotation_iterations);
  cfg.truncated_dimension = ex.integer("fit.truncated_dimension", cfg.truncated_dimension);
  cfg.truncated_order = ex.integer("fit.truncated_order", cfg.truncated_order);
  cfg.eigenvalue_fraction = ex.num("fit.eigenvalue_fraction", cfg.eigenvalue_fraction);
  cfg.reweighted = ex.boolean("fit.reweighted", cfg.reweighted);
  cfg.reweight_iterations = ex.integer("fit.reweight_iterations", cfg.reweight_iterations);

  cfg.solver_tolerance = ex.num("solver.tolerance", cfg.solver_tolerance);
  cfg.solver_max_iterations = ex.integer("solver.max_iterations", cfg.solver_max_iterations);
  cfg.cv_folds = ex.integer("solver.cv_folds", cfg.cv_folds);
  cfg.cv_split = ex.num("solver.cv_split", cfg.cv_split);
  cfg.cv_grid_points = ex.integer("solver.cv_grid_points", cfg.cv_grid_points);
  cfg.cv_grid_min = ex.num("solver.cv_grid_min", cfg.cv_grid_min);
  cfg.cv_grid_max = ex.num("solver.cv_grid_max", cfg.cv_grid_max);

  cfg.reference_samples = ex.integer("experiment.reference_samples", cfg.reference_samples);
  cfg.surrogate_samples = ex.integer("experiment.surrogate_samples", cfg.surrogate_samples);
  cfg.trials = ex.integer("experiment.trials", cfg.trials);
  cfg.training_sweep = ex.int_list("experiment.training_sweep");
  cfg.base_seed = ex.u64("experiment.base_seed", cfg.base_seed);

  ex.check_all_consumed();

  // Validation.
  if (cfg.model_kind == ModelKind::Grid) {
    if (cfg.grid_data.empty()) throw std::runtime_error("load_config: model.grid_data is required");
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::filesystem::path data(cfg.grid_data);
    if (data.is_relative()) cfg.grid_data = (base / data).string();
    const std::size_t ng = cfg.injection_mean.size();
    if (ng == 0) throw std::runtime_error("load_config: injections.mean is required");
    if (cfg.injection_std.size() == 1 && ng > 1)
      cfg.injection_std.assign(ng, cfg.injection_std[0]);
    if (cfg.kl_terms.size() == 1 && ng > 1) cfg.kl_terms.assign(ng, cfg.kl_terms[0]);
    if (cfg.injection_std.size() != ng || cfg.kl_terms.size() != ng)
      throw std::runtime_error("load_config: injections.{mean,std,kl_terms} lengths must agree");
    if (cfg.qoi_kind == QoiKind::BusVoltage)
      throw std::runtime_error(
          "load_config: qoi.kind = bus_voltage is not exposed by the classical grid model");
  } else {
    if (cfg.ridge_dimension < 1)
      throw std::runtime_error("load_config: model.dimension must be >= 1");
  }
  for (int count : {cfg.training_samples, cfg.reference_samples, cfg.surrogate_samples,
                    cfg.trials, cfg.polynomial_order + 1, cfg.cv_folds, cfg.cv_grid_points})
    if (count < 1) throw std::runtime_error("load_config: all counts must be positive");
  for (int m : cfg.training_sweep)
    if (m < 1) throw std::runtime_error("load_config: training_sweep entries must be positive");
  if (!(cfg.dt > 0.0) || !(cfg.t_max > 0.0))
    throw std::runtime_error("load_config: simulation.dt and t_max must be positive");

  // Hash of the effective configuration (file plus overrides).
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : ex.raw()) h = fnv1a(key + "=" + value + "\n", h);
  cfg.config_hash = h;
  return cfg;
}

}  // namespace pdfest
