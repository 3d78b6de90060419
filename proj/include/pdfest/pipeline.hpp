#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pdfest/config.hpp"
#include "pdfest/density.hpp"
#include "pdfest/gridsim.hpp"
#include "pdfest/rotate.hpp"

namespace pdfest {

/// The map from input sample to QoI driven by a config: either the grid
/// transient simulation or the bundled synthetic ridge function.
class QoiModel {
 public:
  virtual ~QoiModel() = default;
  virtual int dimension() const = 0;
  virtual double evaluate(const Vector& xi) const = 0;
};

std::unique_ptr<QoiModel> build_qoi_model(const ExperimentConfig& config);

/// Deterministic stream tags used for sample draws.
std::uint64_t stream_reference();
std::uint64_t stream_training(int m, int trial);
std::uint64_t stream_surrogate(int m, int trial);

struct SampleStore {
  Matrix xi;  // count x d
  Vector u;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;    // base seed
  std::uint64_t stream = 0;  // stream tag
  std::vector<int> excluded;  // diverged sample indices (exclude policy only)
};

/// Draws count (xi, u) pairs; each index owns an independent rng stream, so
/// the result is identical for any worker count. Divergent simulations abort
/// with the sample index unless the config selects the exclude policy.
SampleStore draw_samples(const QoiModel& model, const ExperimentConfig& config, int count,
                         std::uint64_t stream, unsigned workers);

void write_samples_csv(const std::string& path, const SampleStore& store);
SampleStore read_samples_csv(const std::string& path);

/// File-backed draw: reuses matching rows already on disk (resume by chunk)
/// and recomputes only what is missing.
SampleStore simulate_to_file(const QoiModel& model, const ExperimentConfig& config, int count,
                             std::uint64_t stream, const std::string& path, unsigned workers);

struct FitResult {
  SurrogateModel u_tilde;
  SurrogateModel u_star;
  Vector eigenvalues;
  std::vector<double> epsilons;
  std::vector<CrossValidationResult> cv_traces;
  CrossValidationResult star_cv_trace;
  bool degenerate_spectrum = false;
};

/// Full fit: iterative rotations, then the dimension-reduced refit.
FitResult fit_models(const SampleStore& store, const ExperimentConfig& config, unsigned workers);

void save_model_json(const std::string& path, const SurrogateModel& model,
                     const FitResult* context = nullptr);
SurrogateModel load_model_json(const std::string& path);

/// KDE of fresh surrogate evaluations: count standard-normal inputs in the
/// original dimension, pushed through the rotation and expansion.
DensityEstimate density_from_surrogate(const SurrogateModel& model, int count,
                                       std::uint64_t base_seed, std::uint64_t stream,
                                       unsigned workers);

struct KLRow {
  std::string name;
  KLResult forward;  // KL(estimate || reference), the headline direction
  KLResult reverse;  // KL(reference || estimate)
};

std::vector<KLRow> compare_densities(
    const std::vector<std::pair<std::string, DensityEstimate>>& estimates,
    const DensityEstimate& reference);

void write_kl_table_csv(const std::string& path, const std::vector<KLRow>& rows);
std::string format_kl_table(const std::vector<KLRow>& rows);

struct TrialRecord {
  int m = 0;
  int trial = 0;
  bool failed = false;
  std::string error;
  double kl_mc = 0.0, kl_u_tilde = 0.0, kl_u_star = 0.0;
  double rev_mc = 0.0, rev_u_tilde = 0.0, rev_u_star = 0.0;
  int d_star = 0;
  double retained_fraction = 0.0;
};

struct MethodSummary {
  int m = 0;
  std::string method;
  int trials = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double ci99_half = 0.0;  // normal approximation, z = 2.5758
  double median = 0.0;
  bool complete = true;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  std::vector<MethodSummary> summary;
  std::string out_dir;
};

/// Repeated-trial protocol: one shared reference density, then per (M,
/// trial): simulate, fit, estimate densities, compare. All artifacts land
/// under out_dir; re-running with the same config and seed reproduces them.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                unsigned workers);

void write_manifest(const std::string& path, const ExperimentConfig& config,
                    const std::string& command);

}  // namespace pdfest
