#include "pdfest/klexp.hpp"

#include <cmath>
#include <stdexcept>

namespace pdfest {

double covariance_eval(const CovarianceSpec& spec, double t, double s) {
  switch (spec.kind) {
    case CovarianceKind::Exponential:
      return spec.variance * std::exp(-std::abs(t - s) / spec.correlation_length);
  }
  throw std::logic_error("covariance_eval: unknown kernel kind");
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre_unit(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace

QuadratureGrid composite_gauss_legendre(double a, double b, int panels, int order) {
  if (panels < 1 || order < 1) throw std::invalid_argument("composite_gauss_legendre: bad sizes");
  if (!(b > a)) throw std::invalid_argument("composite_gauss_legendre: empty interval");
  std::vector<double> xu, wu;
  gauss_legendre_unit(order, xu, wu);
  QuadratureGrid grid;
  grid.nodes.reserve(static_cast<std::size_t>(panels) * order);
  grid.weights.reserve(static_cast<std::size_t>(panels) * order);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int q = 0; q < order; ++q) {
      grid.nodes.push_back(lo + 0.5 * h * (xu[q] + 1.0));
      grid.weights.push_back(0.5 * h * wu[q]);
    }
  }
  return grid;
}

Matrix KLModel::scaled_eigenfunction_table(const std::vector<double>& times) const {
  Matrix table(static_cast<Eigen::Index>(times.size()), terms);
  for (int i = 0; i < terms; ++i) {
    const double scale = std::sqrt(eigenvalues[i]);
    for (std::size_t r = 0; r < times.size(); ++r)
      table(static_cast<Eigen::Index>(r), i) = scale * interpolants[i](times[r]);
  }
  return table;
}

double KLModel::truncated_variance(double t) const {
  double total = 0.0;
  for (int i = 0; i < terms; ++i) {
    const double phi = interpolants[i](t);
    total += eigenvalues[i] * phi * phi;
  }
  return total;
}

KLModel solve_fredholm_kernel(const std::function<double(double, double)>& kernel, double horizon,
                              int d_k, int n_quad) {
  if (d_k < 1) throw std::invalid_argument("solve_fredholm: d_k must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("solve_fredholm: horizon must be positive");
  constexpr int kPanelOrder = 16;
  const int panels = (n_quad + kPanelOrder - 1) / kPanelOrder;
  QuadratureGrid grid = composite_gauss_legendre(0.0, horizon, panels, kPanelOrder);
  const int n = static_cast<int>(grid.nodes.size());
  if (d_k > n) throw std::invalid_argument("solve_fredholm: d_k exceeds quadrature size");

  // Symmetric Nystrom matrix B = W^{1/2} C W^{1/2}.
  Matrix b(n, n);
  std::vector<double> sqw(n);
  for (int i = 0; i < n; ++i) sqw[i] = std::sqrt(grid.weights[i]);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = sqw[i] * sqw[j] * kernel(grid.nodes[i], grid.nodes[j]);
      b(i, j) = v;
      b(j, i) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("solve_fredholm: eigensolver failed to converge");

  KLModel model;
  model.terms = d_k;
  model.horizon = horizon;
  model.time_grid = grid;
  model.eigenvalues.resize(d_k);
  model.eigenfunctions.resize(n, d_k);
  model.interpolants.reserve(d_k);
  for (int k = 0; k < d_k; ++k) {
    const int src = n - 1 - k;  // Eigen sorts ascending
    const double gamma = eig.eigenvalues()[src];
    if (!(gamma > 0.0))
      throw std::runtime_error("solve_fredholm: requested mode has non-positive eigenvalue; "
                               "increase n_quad or reduce d_k");
    model.eigenvalues[k] = gamma;
    Vector phi = eig.eigenvectors().col(src);
    // Deterministic sign: largest-magnitude node value positive.
    Eigen::Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    if (phi[imax] < 0.0) phi = -phi;
    std::vector<double> values(n);
    for (int i = 0; i < n; ++i) {
      model.eigenfunctions(i, k) = phi[i] / sqw[i];
      values[i] = model.eigenfunctions(i, k);
    }
    model.interpolants.emplace_back(grid.nodes, values);
  }
  return model;
}

KLModel solve_fredholm(const CovarianceSpec& spec, int d_k, int n_quad) {
  if (!(spec.variance > 0.0)) throw std::invalid_argument("solve_fredholm: variance must be positive");
  if (!(spec.correlation_length > 0.0))
    throw std::invalid_argument("solve_fredholm: correlation length must be positive");
  return solve_fredholm_kernel(
      [&spec](double t, double s) { return covariance_eval(spec, t, s); }, spec.horizon, d_k,
      n_quad);
}

std::pair<double, double> lognormal_params(double mean_power, double std_power) {
  if (!(mean_power > 0.0)) throw std::invalid_argument("lognormal_params: mean must be positive");
  if (std_power < 0.0) throw std::invalid_argument("lognormal_params: std must be non-negative");
  const double ratio = std_power / mean_power;
  const double var_log = std::log1p(ratio * ratio);
  const double mean_log = std::log(mean_power) - 0.5 * var_log;
  return {mean_log, var_log};
}

InjectionModel make_injection_model(double mean_power, double std_power,
                                    const InjectionOptions& options) {
  InjectionModel model;
  model.mean_power = mean_power;
  model.std_power = std_power;
  double mean_log, var_log;
  if (options.sigma_in_log_space) {
    if (!(mean_power > 0.0))
      throw std::invalid_argument("make_injection_model: mean must be positive");
    var_log = std_power * std_power;
    mean_log = std::log(mean_power) - 0.5 * var_log;
  } else {
    std::tie(mean_log, var_log) = lognormal_params(mean_power, std_power);
  }
  if (var_log > 0.0) {
    CovarianceSpec spec;
    spec.variance = var_log;
    spec.correlation_length = options.correlation_length;
    spec.horizon = options.horizon;
    model.kl = solve_fredholm(spec, options.kl_terms, options.n_quad);
  } else {
    model.kl.terms = 0;
    model.kl.horizon = options.horizon;
  }
  model.kl.mean_log = mean_log;
  return model;
}

Vector sample_path(const InjectionModel& model, const Vector& xi, const std::vector<double>& times) {
  if (xi.size() != model.kl.terms)
    throw std::invalid_argument("sample_path: xi length must equal the K-L term count");
  const double slack = 1e-9 * std::max(1.0, model.kl.horizon);
  for (double t : times)
    if (t < -slack || t > model.kl.horizon + slack)
      throw std::out_of_range("sample_path: query time outside the process horizon");
  Vector log_path = Vector::Constant(static_cast<Eigen::Index>(times.size()), model.kl.mean_log);
  if (model.kl.terms > 0) log_path += model.kl.scaled_eigenfunction_table(times) * xi;
  return log_path.array().exp();
}

}  // namespace pdfest
