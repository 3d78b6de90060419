#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "pdfest/spline.hpp"
#include "pdfest/types.hpp"

namespace pdfest {

enum class CovarianceKind { Exponential };

/// Stationary covariance of the log-power process on [0, horizon].
struct CovarianceSpec {
  double variance = 1.0;            // sigma_Y^2, log space
  double correlation_length = 1.0;  // seconds
  double horizon = 1.0;             // seconds
  CovarianceKind kind = CovarianceKind::Exponential;
};

double covariance_eval(const CovarianceSpec& spec, double t, double s);

struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Composite Gauss-Legendre rule on [a, b] with `panels` panels of `order`
/// points each. Nodes are strictly increasing.
QuadratureGrid composite_gauss_legendre(double a, double b, int panels, int order);

/// Truncated Karhunen-Loeve model of one Gaussian process.
struct KLModel {
  int terms = 0;
  Vector eigenvalues;       // descending, positive
  Matrix eigenfunctions;    // n_quad x terms, values at grid nodes, unit L2[0,T] norm
  double mean_log = 0.0;    // <Y>
  double horizon = 0.0;
  QuadratureGrid time_grid;
  std::vector<CubicSpline> interpolants;  // one per kept mode

  /// phi_i(t) via the grid spline.
  double eigenfunction(int i, double t) const { return interpolants[i](t); }

  /// table(r, i) = sqrt(gamma_i) * phi_i(times[r]); the per-sample log path
  /// is then mean_log + table * xi.
  Matrix scaled_eigenfunction_table(const std::vector<double>& times) const;

  /// Truncated variance sum_i gamma_i phi_i(t)^2.
  double truncated_variance(double t) const;
};

/// Nystrom discretization of the covariance eigenproblem: assemble the
/// weighted kernel matrix W^{1/2} C W^{1/2}, eigendecompose, keep the top
/// d_k pairs, and normalize eigenfunctions to unit L2[0,T] norm.
/// n_quad is rounded up to a whole number of 16-point panels.
KLModel solve_fredholm(const CovarianceSpec& spec, int d_k, int n_quad = 256);

/// Generalized entry point for a pluggable kernel evaluation.
KLModel solve_fredholm_kernel(const std::function<double(double, double)>& kernel, double horizon,
                              int d_k, int n_quad);

/// Log-space parameters such that exp(N(mean_log, var_log)) has exactly the
/// requested first two moments: var_log = ln(1 + s^2/m^2),
/// mean_log = ln(m) - var_log / 2. Returns {mean_log, var_log}.
std::pair<double, double> lognormal_params(double mean_power, double std_power);

/// Lognormal power-injection process driven by a truncated K-L expansion.
struct InjectionModel {
  double mean_power = 0.0;  // target mean of P^m, p.u.
  double std_power = 0.0;   // target std of P^m, p.u.
  KLModel kl;
};

struct InjectionOptions {
  double correlation_length = 1.8;
  double horizon = 10.0;
  int kl_terms = 25;
  int n_quad = 256;
  /// When true, std_power is read directly as the log-space standard
  /// deviation instead of being moment-matched (the mean of P^m is kept
  /// exact either way).
  bool sigma_in_log_space = false;
};

/// Builds the K-L model of Y = ln P^m for one generator. std_power = 0
/// yields a deterministic model with zero K-L terms.
InjectionModel make_injection_model(double mean_power, double std_power,
                                    const InjectionOptions& options);

/// P^m(t) = exp(mean_log + sum_i sqrt(gamma_i) phi_i(t) xi_i) at the query
/// times. xi must have length model.kl.terms; times must lie within the
/// horizon.
Vector sample_path(const InjectionModel& model, const Vector& xi, const std::vector<double>& times);

}  // namespace pdfest
