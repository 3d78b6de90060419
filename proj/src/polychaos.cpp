#include "pdfest/polychaos.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pdfest {

std::uint64_t basis_size(int dimension, int max_degree) {
  if (dimension < 1) throw std::invalid_argument("basis_size: dimension must be >= 1");
  if (max_degree < 0) throw std::invalid_argument("basis_size: max_degree must be >= 0");
  // binom(P+d, min(P, d)) accumulated multiplicatively with overflow checks.
  const std::uint64_t n = static_cast<std::uint64_t>(dimension) + static_cast<std::uint64_t>(max_degree);
  const std::uint64_t k = std::min<std::uint64_t>(dimension, max_degree);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t factor = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor)
      throw std::overflow_error("basis_size: binomial(" + std::to_string(n) + ", " +
                                std::to_string(k) + ") exceeds 64-bit capacity");
    result = result * factor / i;  // divisible at every step: result is binom(n-k+i, i)
  }
  return result;
}

namespace {

void append_graded(std::vector<MultiIndex>& out, MultiIndex& scratch, int dim, int remaining) {
  if (dim + 1 == static_cast<int>(scratch.size())) {
    scratch[dim] = remaining;
    out.push_back(scratch);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    scratch[dim] = a;
    append_graded(out, scratch, dim + 1, remaining - a);
  }
}

}  // namespace

MultiIndexBasis enumerate_basis(int dimension, int max_degree) {
  const std::uint64_t n = basis_size(dimension, max_degree);
  if (n > (std::uint64_t{1} << 32))
    throw std::overflow_error("enumerate_basis: basis of size " + std::to_string(n) +
                              " is too large to materialize");
  MultiIndexBasis basis;
  basis.dimension = dimension;
  basis.max_degree = max_degree;
  basis.indices.reserve(static_cast<std::size_t>(n));
  MultiIndex scratch(static_cast<std::size_t>(dimension), 0);
  for (int degree = 0; degree <= max_degree; ++degree)
    append_graded(basis.indices, scratch, 0, degree);
  return basis;
}

double hermite_eval(int n, double x) {
  if (n < 0) throw std::invalid_argument("hermite_eval: negative degree");
  double prev = 0.0;  // psi_{-1}
  double cur = 1.0;   // psi_0
  for (int k = 0; k < n; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                        std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_deriv(int n, double x) {
  if (n < 0) throw std::invalid_argument("hermite_deriv: negative degree");
  if (n == 0) return 0.0;
  return std::sqrt(static_cast<double>(n)) * hermite_eval(n - 1, x);
}

void hermite_eval_all(int n, double x, double* out) {
  out[0] = 1.0;
  if (n == 0) return;
  out[1] = x;
  for (int k = 1; k < n; ++k)
    out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
}

double eval_multivariate(const MultiIndexBasis& basis, std::size_t j, const Vector& xi) {
  if (j >= basis.size()) throw std::out_of_range("eval_multivariate: basis index out of range");
  if (xi.size() != basis.dimension)
    throw std::invalid_argument("eval_multivariate: point dimension mismatch");
  const MultiIndex& alpha = basis.indices[j];
  double value = 1.0;
  for (int k = 0; k < basis.dimension; ++k)
    if (alpha[k] != 0) value *= hermite_eval(alpha[k], xi[k]);
  return value;
}

MeasurementMatrix build_measurement_matrix(const MultiIndexBasis& basis, const Matrix& samples) {
  if (samples.cols() != basis.dimension)
    throw std::invalid_argument("build_measurement_matrix: sample dimension mismatch");
  const Eigen::Index m = samples.rows();
  const Eigen::Index n = static_cast<Eigen::Index>(basis.size());
  const int d = basis.dimension;
  const int p = basis.max_degree;

  MeasurementMatrix result;
  result.basis = basis;
  result.sample_count = static_cast<int>(m);
  result.entries.resize(m, n);

  std::vector<double> table(static_cast<std::size_t>(d) * (p + 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int k = 0; k < d; ++k) hermite_eval_all(p, samples(i, k), &table[k * (p + 1)]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const MultiIndex& alpha = basis.indices[static_cast<std::size_t>(j)];
      double value = 1.0;
      for (int k = 0; k < d; ++k)
        if (alpha[k] != 0) value *= table[k * (p + 1) + alpha[k]];
      result.entries(i, j) = value;
    }
  }
  return result;
}

}  // namespace pdfest
