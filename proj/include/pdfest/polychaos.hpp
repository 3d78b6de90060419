#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pdfest/types.hpp"

namespace pdfest {

/// Per-dimension polynomial degrees of one tensor-product Hermite term.
using MultiIndex = std::vector<int>;

/// Total-degree multi-index set in graded lexicographic order: ascending
/// total degree, lexicographic within a degree, all-zeros term first.
struct MultiIndexBasis {
  int dimension = 0;
  int max_degree = 0;
  std::vector<MultiIndex> indices;

  std::size_t size() const { return indices.size(); }
};

/// binom(max_degree + dimension, max_degree) with overflow detection.
/// Throws std::overflow_error if the count exceeds 64-bit capacity.
std::uint64_t basis_size(int dimension, int max_degree);

/// Enumerates the total-degree basis. dimension >= 1, max_degree >= 0.
MultiIndexBasis enumerate_basis(int dimension, int max_degree);

/// Normalized probabilists' Hermite polynomial psi_n(x), orthonormal under
/// the standard normal weight. Evaluated by the normalized three-term
/// recurrence psi_{n+1} = (x psi_n - sqrt(n) psi_{n-1}) / sqrt(n+1).
double hermite_eval(int n, double x);

/// psi_n'(x) = sqrt(n) psi_{n-1}(x); zero for n = 0.
double hermite_deriv(int n, double x);

/// Fills out[0..n] with psi_0(x) .. psi_n(x) in one recurrence pass.
void hermite_eval_all(int n, double x, double* out);

/// Tensor-product evaluation of basis term j at point xi (length d).
double eval_multivariate(const MultiIndexBasis& basis, std::size_t j, const Vector& xi);

struct MeasurementMatrix {
  RowMatrix entries;  // sample_count x basis.size()
  MultiIndexBasis basis;
  int sample_count = 0;
};

/// entries(i, j) = psi_j(sample row i). Column 0 is all ones.
MeasurementMatrix build_measurement_matrix(const MultiIndexBasis& basis, const Matrix& samples);

}  // namespace pdfest
