#pragma once

#include <cstdint>
#include <vector>

#include "pdfest/types.hpp"

namespace pdfest {

/// Basis pursuit denoising instance: min ||W c||_1 s.t. ||Psi c - u||_2 <= epsilon.
/// Empty weights mean W = I.
struct BPDNProblem {
  RowMatrix Psi;
  Vector u;
  double epsilon = 0.0;
  Vector weights;  // optional, strictly positive when present
};

struct SolveReport {
  Vector coefficients;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Spectral projected gradient on the one-norm-constrained subproblem with a
/// Newton root-finding outer loop on the one-norm budget. The weighted
/// problem is solved by the substitution c~ = W c (columns of Psi scaled by
/// 1/w_i). max_iter = 0 selects an automatic cap. A non-converged report is
/// returned rather than a silent infeasible answer.
SolveReport solve_bpdn(const BPDNProblem& problem, double tol = 1e-6, int max_iter = 0);

/// Iteratively reweighted l1: start from the unweighted solution, then
/// re-solve with w_i = 1 / (|c_i| + gamma). n_iter counts solves in total,
/// so n_iter = 1 is exactly solve_bpdn. gamma <= 0 selects the relative
/// default 1e-4 * max_i |c_i| of the current iterate.
SolveReport solve_reweighted(const BPDNProblem& problem, double gamma, int n_iter,
                             double tol = 1e-6, int max_iter = 0);

struct LeastSquaresResult {
  Vector coefficients;
  bool rank_deficient = false;
};

/// Minimum-norm least squares via complete orthogonal decomposition.
/// Overdetermined full-rank systems reduce to ordinary least squares;
/// underdetermined ones give the minimum-l2-norm exact solution.
LeastSquaresResult solve_least_squares(const RowMatrix& Psi, const Vector& u);

struct CrossValidationOptions {
  double split_ratio = 0.8;  // fraction of rows used for reconstruction
  int n_folds = 4;
  std::uint64_t seed = 0;
  double solver_tol = 1e-5;
  int solver_max_iter = 0;
  unsigned workers = 1;
  // Auto grid (used when no explicit candidate grid is given): grid_points
  // log-spaced values in [grid_lo, grid_hi] * ||u_r||_2 per fold.
  int grid_points = 10;
  double grid_lo = 1e-4;
  double grid_hi = 1.0;
};

struct CrossValidationResult {
  double epsilon = 0.0;            // sqrt(M / M_r) * best epsilon_r
  double best_candidate = 0.0;     // the selected epsilon_r
  std::vector<double> candidates;  // epsilon_r grid (fold means when auto)
  std::vector<double> validation_errors;  // mean epsilon_v per candidate
};

/// Hold-out estimate of the residual bound: split rows into reconstruction
/// and validation sets, solve at each candidate epsilon_r, score by the
/// validation residual, pick the minimizer and rescale by sqrt(M / M_r).
/// Validation errors are averaged over n_folds random splits.
CrossValidationResult cross_validate_epsilon(const RowMatrix& Psi, const Vector& u,
                                             const std::vector<double>& candidate_grid,
                                             const CrossValidationOptions& options = {});

/// Same, with the per-fold relative candidate grid from the options.
CrossValidationResult cross_validate_epsilon_auto(const RowMatrix& Psi, const Vector& u,
                                                  const CrossValidationOptions& options = {});

}  // namespace pdfest
