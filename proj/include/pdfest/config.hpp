#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pdfest {

enum class ModelKind { Grid, Ridge };
enum class QoiKind { RelativeSpeed, BusVoltage };
enum class DivergencePolicy { Abort, Exclude };

/// Everything a pipeline run needs; parsed from the sectioned key/value
/// config file, with CLI overrides applied before validation.
struct ExperimentConfig {
  // [model]
  ModelKind model_kind = ModelKind::Grid;
  std::string grid_data;  // resolved against the config file directory
  int ridge_dimension = 6;
  std::uint64_t ridge_direction_seed = 1;

  // [injections] (grid model)
  std::vector<double> injection_mean;
  std::vector<double> injection_std;
  double correlation_length = 1.8;
  std::vector<int> kl_terms;
  int kl_quadrature = 256;
  bool sigma_in_log_space = false;

  // [fault]
  std::optional<int> fault_bus;
  double fault_t_on = 0.0;
  double fault_duration = 0.0;

  // [simulation]
  double t_max = 10.0;
  double dt = 1e-3;
  DivergencePolicy on_divergence = DivergencePolicy::Abort;

  // [qoi]
  QoiKind qoi_kind = QoiKind::RelativeSpeed;
  int qoi_generator = 2;  // 1-based
  int qoi_reference = 1;  // 1-based

  // [fit]
  int training_samples = 500;
  int polynomial_order = 2;
  int rotation_iterations = 2;
  int truncated_dimension = 0;  // 0: choose by eigenvalue_fraction
  int truncated_order = 4;
  double eigenvalue_fraction = 0.95;
  bool reweighted = false;
  int reweight_iterations = 3;

  // [solver]
  double solver_tolerance = 1e-6;
  int solver_max_iterations = 0;
  int cv_folds = 4;
  double cv_split = 0.8;
  int cv_grid_points = 10;
  double cv_grid_min = 1e-4;
  double cv_grid_max = 1.0;

  // [experiment]
  int reference_samples = 10000;
  int surrogate_samples = 10000;
  int trials = 10;
  std::vector<int> training_sweep;  // empty: single point at training_samples
  std::uint64_t base_seed = 1;

  std::uint64_t config_hash = 0;  // FNV-1a of the effective key/value view

  /// Total stochastic dimension implied by the config.
  int stochastic_dimension() const;
};

/// Parses the config file, applies "section.key=value" overrides, validates
/// all keys (unknown keys are errors) and resolves relative paths against
/// the config file's directory.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

}  // namespace pdfest
