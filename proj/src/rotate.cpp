#include "pdfest/rotate.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "pdfest/rng.hpp"

namespace pdfest {

namespace {

struct IndexHash {
  std::size_t operator()(const MultiIndex& a) const {
    std::size_t h = 0x811c9dc5u;
    for (int v : a) h = (h ^ static_cast<std::size_t>(v)) * 0x01000193u;
    return h;
  }
};

using IndexMap = std::unordered_map<MultiIndex, int, IndexHash>;

IndexMap build_index_map(const MultiIndexBasis& basis) {
  IndexMap map;
  map.reserve(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    map.emplace(basis.indices[j], static_cast<int>(j));
  return map;
}

// Deterministic eigenvector orientation: largest-magnitude component positive.
void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v[imax] < 0.0) v = -v;
}

SolveReport run_solver(const RowMatrix& psi, const Vector& u, double epsilon,
                       const RotationConfig& config) {
  BPDNProblem problem{psi, u, epsilon, Vector()};
  if (config.reweighted)
    return solve_reweighted(problem, config.reweight_gamma, config.reweight_iters,
                            config.solver_tol, config.solver_max_iter);
  return solve_bpdn(problem, config.solver_tol, config.solver_max_iter);
}

}  // namespace

double kernel_entry(int i, int j, const MultiIndex& alpha_k, const MultiIndex& alpha_l) {
  const int d = static_cast<int>(alpha_k.size());
  if (static_cast<int>(alpha_l.size()) != d)
    throw std::invalid_argument("kernel_entry: multi-index length mismatch");
  if (i < 0 || i >= d || j < 0 || j >= d)
    throw std::invalid_argument("kernel_entry: dimension index out of range");

  if (i == j) {
    // E[psi_k' psi_l'] in one variable: both indices drop by one, all other
    // components must match, giving sqrt(a_i b_i) delta_{a_i, b_i} delta_rest.
    if (alpha_k != alpha_l) return 0.0;
    return static_cast<double>(alpha_k[i]);
  }
  for (int m = 0; m < d; ++m) {
    if (m == i || m == j) continue;
    if (alpha_k[m] != alpha_l[m]) return 0.0;
  }
  if (alpha_l[i] != alpha_k[i] - 1) return 0.0;
  if (alpha_l[j] != alpha_k[j] + 1) return 0.0;
  return std::sqrt(static_cast<double>(alpha_k[i]) * static_cast<double>(alpha_l[j]));
}

GradientMatrix assemble_G(const Vector& coefficients, const MultiIndexBasis& basis) {
  const int d = basis.dimension;
  const std::size_t n = basis.size();
  if (coefficients.size() != static_cast<Eigen::Index>(n))
    throw std::invalid_argument("assemble_G: coefficient length must equal basis size");

  GradientMatrix result;
  result.source_basis = basis;
  result.G = Matrix::Zero(d, d);
  const IndexMap map = build_index_map(basis);

  // Upper triangle only; (K_ij)_{kl} is nonzero iff alpha_l = alpha_k - e_i + e_j.
  MultiIndex shifted;
  for (std::size_t k = 0; k < n; ++k) {
    const double ck = coefficients[static_cast<Eigen::Index>(k)];
    if (ck == 0.0) continue;
    const MultiIndex& alpha = basis.indices[k];
    for (int i = 0; i < d; ++i) {
      const int ai = alpha[i];
      if (ai == 0) continue;
      result.G(i, i) += ck * ck * ai;
      for (int j = i + 1; j < d; ++j) {
        shifted = alpha;
        shifted[i] -= 1;
        shifted[j] += 1;
        const auto it = map.find(shifted);
        if (it == map.end()) continue;
        const double cl = coefficients[it->second];
        result.G(i, j) += ck * cl * std::sqrt(static_cast<double>(ai) *
                                              static_cast<double>(alpha[j] + 1));
      }
    }
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) result.G(j, i) = result.G(i, j);
  return result;
}

RotationState iterate_rotations(const Matrix& samples, const Vector& u, int max_degree, int l_max,
                                const RotationConfig& config) {
  const int d = static_cast<int>(samples.cols());
  if (samples.rows() < 1) throw std::invalid_argument("iterate_rotations: no samples");
  if (samples.rows() != u.size())
    throw std::invalid_argument("iterate_rotations: sample/output count mismatch");
  if (l_max < 0) throw std::invalid_argument("iterate_rotations: l_max must be >= 0");

  RotationState state;
  state.basis = enumerate_basis(d, max_degree);
  state.A = Matrix::Identity(d, d);
  state.eta_samples = samples;

  MeasurementMatrix psi = build_measurement_matrix(state.basis, state.eta_samples);
  CrossValidationOptions cv = config.cv;
  cv.seed = config.cv.seed;
  CrossValidationResult cvr = cross_validate_epsilon_auto(psi.entries, u, cv);
  state.epsilons.push_back(cvr.epsilon);
  state.cv_traces.push_back(cvr);
  SolveReport report = run_solver(psi.entries, u, cvr.epsilon, config);
  if (!report.converged)
    throw std::runtime_error("iterate_rotations: initial solve did not converge");
  state.coefficients = report.coefficients;

  for (int l = 1; l <= l_max; ++l) {
    const GradientMatrix gm = assemble_G(state.coefficients, state.basis);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gm.G);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("iterate_rotations: eigendecomposition failed at iteration " +
                               std::to_string(l));
    // Eigen sorts ascending; store descending with deterministic signs.
    Matrix rot(d, d);
    state.eigenvalues.resize(d);
    for (int c = 0; c < d; ++c) {
      rot.col(c) = eig.eigenvectors().col(d - 1 - c);
      fix_sign(rot.col(c));
      state.eigenvalues[c] = eig.eigenvalues()[d - 1 - c];
    }
    for (int c = 0; c + 1 < d; ++c)
      if (std::abs(state.eigenvalues[c] - state.eigenvalues[c + 1]) <=
          1e-12 * std::max(1.0, std::abs(state.eigenvalues[0])))
        state.degenerate_spectrum = true;

    state.eta_samples = state.eta_samples * rot;  // eta^{l+1} = U^T eta^l per sample
    state.A = rot.transpose() * state.A;

    psi = build_measurement_matrix(state.basis, state.eta_samples);
    cv.seed = mix64(config.cv.seed ^ static_cast<std::uint64_t>(l));
    cvr = cross_validate_epsilon_auto(psi.entries, u, cv);
    state.epsilons.push_back(cvr.epsilon);
    state.cv_traces.push_back(cvr);
    report = run_solver(psi.entries, u, cvr.epsilon, config);
    if (!report.converged)
      throw std::runtime_error("iterate_rotations: solve did not converge at iteration " +
                               std::to_string(l));
    state.coefficients = report.coefficients;
    state.iteration = l;
  }
  return state;
}

SurrogateModel to_surrogate(const RotationState& state) {
  SurrogateModel model;
  model.basis = state.basis;
  model.coefficients = state.coefficients;
  model.rotation = state.A;
  model.original_dimension = state.basis.dimension;
  model.retained_fraction = 1.0;
  model.epsilon = state.epsilons.empty() ? 0.0 : state.epsilons.back();
  return model;
}

SurrogateModel truncate_and_refit(const RotationState& state, const Vector& u, double theta,
                                  int P_star, const RotationConfig& config, int explicit_d_star,
                                  CrossValidationResult* cv_trace) {
  const int d = state.basis.dimension;
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("truncate_and_refit: theta must lie in (0, 1]");
  if (P_star < state.basis.max_degree)
    throw std::invalid_argument("truncate_and_refit: refit order must be >= the original order");

  int d_star = d;
  double retained = 1.0;
  if (explicit_d_star > 0) {
    if (explicit_d_star > d) throw std::invalid_argument("truncate_and_refit: d* exceeds d");
    d_star = explicit_d_star;
  }
  if (state.eigenvalues.size() == d) {
    const double total = state.eigenvalues.sum();
    if (explicit_d_star > 0) {
      retained = total > 0.0 ? state.eigenvalues.head(d_star).sum() / total : 1.0;
    } else if (total > 0.0) {
      double cum = 0.0;
      d_star = d;
      for (int k = 0; k < d; ++k) {
        cum += state.eigenvalues[k];
        if (cum > theta * total) {
          d_star = k + 1;
          break;
        }
      }
      retained = state.eigenvalues.head(d_star).sum() / total;
    }
  } else if (explicit_d_star == 0 && theta < 1.0) {
    throw std::invalid_argument(
        "truncate_and_refit: eigenvalue-based truncation requires at least one rotation; "
        "set d* explicitly or use theta = 1");
  }

  if (d_star == d && P_star == state.basis.max_degree) {
    // Same basis, same samples: the refit would reproduce the existing fit.
    SurrogateModel model = to_surrogate(state);
    model.retained_fraction = retained;
    return model;
  }

  MultiIndexBasis basis_star = enumerate_basis(d_star, P_star);
  if (basis_star.size() >= state.basis.size() && !config.allow_larger_refit)
    throw std::runtime_error("truncate_and_refit: truncated basis (" +
                             std::to_string(basis_star.size()) + ") is not smaller than the " +
                             "original (" + std::to_string(state.basis.size()) +
                             "); set allow_larger_refit to force");

  const Matrix eta_star = state.eta_samples.leftCols(d_star);
  MeasurementMatrix psi = build_measurement_matrix(basis_star, eta_star);
  CrossValidationOptions cv = config.cv;
  cv.seed = mix64(config.cv.seed ^ 0x74727563ULL);
  const CrossValidationResult cvr = cross_validate_epsilon_auto(psi.entries, u, cv);
  if (cv_trace) *cv_trace = cvr;
  const SolveReport report = run_solver(psi.entries, u, cvr.epsilon, config);
  if (!report.converged)
    throw std::runtime_error("truncate_and_refit: solve did not converge");

  SurrogateModel model;
  model.basis = std::move(basis_star);
  model.coefficients = report.coefficients;
  model.rotation = state.A;
  model.original_dimension = d;
  model.retained_fraction = retained;
  model.epsilon = cvr.epsilon;
  return model;
}

double eval_surrogate(const SurrogateModel& model, const Vector& xi) {
  if (xi.size() != model.original_dimension)
    throw std::invalid_argument("eval_surrogate: point dimension mismatch");
  const Vector eta = model.rotation * xi;
  const int d_star = model.basis.dimension;
  const int p = model.basis.max_degree;
  std::vector<double> table(static_cast<std::size_t>(d_star) * (p + 1));
  for (int k = 0; k < d_star; ++k) hermite_eval_all(p, eta[k], &table[k * (p + 1)]);
  double value = 0.0;
  for (std::size_t j = 0; j < model.basis.size(); ++j) {
    const MultiIndex& alpha = model.basis.indices[j];
    double term = model.coefficients[static_cast<Eigen::Index>(j)];
    if (term == 0.0) continue;
    for (int k = 0; k < d_star; ++k)
      if (alpha[k] != 0) term *= table[k * (p + 1) + alpha[k]];
    value += term;
  }
  return value;
}

Vector eval_surrogate_many(const SurrogateModel& model, const Matrix& xis) {
  Vector out(xis.rows());
  for (Eigen::Index i = 0; i < xis.rows(); ++i) out[i] = eval_surrogate(model, xis.row(i));
  return out;
}

}  // namespace pdfest
