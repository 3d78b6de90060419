#pragma once

#include <vector>

#include "pdfest/polychaos.hpp"
#include "pdfest/sparse.hpp"
#include "pdfest/types.hpp"

namespace pdfest {

/// Closed-form E[d psi_k / d xi_i * d psi_l / d xi_j] for normalized Hermite
/// tensor products: a single-index-shift Kronecker pattern, no quadrature.
double kernel_entry(int i, int j, const MultiIndex& alpha_k, const MultiIndex& alpha_l);

struct GradientMatrix {
  Matrix G;  // d x d, symmetric positive semi-definite
  MultiIndexBasis source_basis;
};

/// G_ij = c^T K_ij c, computed from the index-shift structure: only the
/// upper triangle is formed and then mirrored.
GradientMatrix assemble_G(const Vector& coefficients, const MultiIndexBasis& basis);

struct RotationConfig {
  double solver_tol = 1e-6;
  int solver_max_iter = 0;
  bool reweighted = false;
  int reweight_iters = 3;
  double reweight_gamma = 0.0;  // <= 0 selects the relative default
  CrossValidationOptions cv;
  /// Permit a truncated refit whose basis is not smaller than the original.
  bool allow_larger_refit = false;
};

struct RotationState {
  Matrix A;            // cumulative rotation, eta = A xi
  Matrix eta_samples;  // M x d, equals (xi samples) * A^T
  Vector coefficients;
  Vector eigenvalues;  // spectrum of the gradient-variance matrix behind the
                       // last rotation (empty when l_max = 0)
  int iteration = 0;
  MultiIndexBasis basis;
  std::vector<double> epsilons;  // cross-validated threshold per solve
  std::vector<CrossValidationResult> cv_traces;  // one per solve
  bool degenerate_spectrum = false;  // eigenvalue ties made the rotation non-unique
};

/// Sparsity-enhancing l1 recovery with iterative rotations: initial solve at
/// a cross-validated threshold, then l_max cycles of gradient-variance
/// eigendecomposition, sample rotation, and re-solve. The threshold is
/// re-estimated by cross-validation at every cycle.
RotationState iterate_rotations(const Matrix& samples, const Vector& u, int max_degree, int l_max,
                                const RotationConfig& config = {});

struct SurrogateModel {
  MultiIndexBasis basis;  // dimension d* (== d when untruncated)
  Vector coefficients;
  Matrix rotation;        // original-dimension cumulative A; identity if none
  int original_dimension = 0;
  double retained_fraction = 1.0;
  double epsilon = 0.0;
};

/// The untruncated surrogate carried by a rotation state.
SurrogateModel to_surrogate(const RotationState& state);

/// Dimension reduction after rotations: pick the smallest d* whose leading
/// eigenvalue mass exceeds theta (or use explicit_d_star), keep the first d*
/// rotated variables, rebuild the basis at order P_star >= P and re-solve.
/// With d* = d and P* = P the existing fit is reused unchanged.
SurrogateModel truncate_and_refit(const RotationState& state, const Vector& u, double theta,
                                  int P_star, const RotationConfig& config = {},
                                  int explicit_d_star = 0,
                                  CrossValidationResult* cv_trace = nullptr);

/// Evaluates the surrogate at a point in the original input space.
double eval_surrogate(const SurrogateModel& model, const Vector& xi);

/// Bulk evaluation; rows of xis are points.
Vector eval_surrogate_many(const SurrogateModel& model, const Matrix& xis);

}  // namespace pdfest
