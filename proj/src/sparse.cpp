#include "pdfest/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pdfest/parallel.hpp"
#include "pdfest/rng.hpp"

namespace pdfest {

namespace {

constexpr double kStepMin = 1e-16;
constexpr double kStepMax = 1e5;
constexpr double kArmijo = 1e-4;
constexpr double kBpTol = 1e-9;      // residual floor relative to ||u||
constexpr double kDecTol = 1e-4;     // relative objective change that triggers a tau update
constexpr int kHistory = 10;         // nonmonotone line-search memory

// Euclidean projection onto the l1 ball of radius tau.
Vector project_l1(const Vector& v, double tau) {
  if (tau <= 0.0) return Vector::Zero(v.size());
  const double norm1 = v.lpNorm<1>();
  if (norm1 <= tau) return v;
  Vector abs = v.cwiseAbs();
  std::vector<double> sorted(abs.data(), abs.data() + abs.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumsum += sorted[k];
    const double candidate = (cumsum - tau) / static_cast<double>(k + 1);
    if (candidate >= sorted[k]) break;
    theta = candidate;
  }
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = abs[i] - theta;
    out[i] = mag > 0.0 ? (v[i] > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

struct SpgState {
  Vector x, r, g;
  double f = 0.0;
};

// min ||x||_1 s.t. ||A x - b|| <= sigma, SPGL1-style: Barzilai-Borwein
// spectral projected gradient on the LASSO subproblem, Newton updates of the
// one-norm budget tau driven by the Pareto-curve value/slope (rNorm, -gNorm).
SolveReport spgl1_solve(const RowMatrix& a, const Vector& b, double sigma, double opt_tol,
                        int max_iter) {
  const Eigen::Index n = a.cols();
  const double b_norm = b.norm();

  SolveReport report;
  report.coefficients = Vector::Zero(n);
  if (b_norm <= sigma || b_norm == 0.0) {
    report.residual_norm = b_norm;
    report.converged = true;
    return report;
  }
  if (max_iter <= 0) max_iter = std::max<int>(500, 5 * static_cast<int>(a.rows()));

  SpgState s;
  s.x = Vector::Zero(n);
  s.r = b;
  s.f = 0.5 * s.r.squaredNorm();
  s.g = -(a.transpose() * s.r);

  double tau = 0.0;
  double f_old = s.f;  // objective at the last tau update

  std::vector<double> last_f(kHistory, -std::numeric_limits<double>::infinity());
  last_f[0] = s.f;

  double f_best = s.f;
  Vector x_best = s.x;

  double step_max = kStepMax;
  double g_step;
  {
    const Vector dx = project_l1(s.x - s.g, tau) - s.x;
    const double dx_norm = dx.lpNorm<Eigen::Infinity>();
    g_step = dx_norm < (1.0 / step_max) ? step_max
                                        : std::min(step_max, std::max(kStepMin, 1.0 / dx_norm));
  }

  enum Exit { kNone, kConverged, kIterations, kLineError, kInfeasible };
  Exit exit_code = kNone;
  int iter = 0;
  int line_errors = 0;
  int boosts = 0;

  const double feasible_bound = sigma * (1.0 + 1e-6) + kBpTol * b_norm;

  while (true) {
    const double r_norm = s.r.norm();
    const double g_norm = s.g.lpNorm<Eigen::Infinity>();

    const double gap = s.r.dot(s.r - b) + tau * g_norm;
    const double r_gap = std::abs(gap) / std::max(1.0, s.f);
    const double a_error1 = r_norm - sigma;
    const double a_error2 = s.f - 0.5 * sigma * sigma;
    const double r_error1 = std::abs(a_error1) / std::max(1.0, r_norm);
    const double r_error2 = std::abs(a_error2) / std::max(1.0, s.f);

    bool boosted = false;
    if (r_gap <= std::max(opt_tol, r_error2) || r_error1 <= opt_tol) {
      if (r_norm <= feasible_bound) {
        exit_code = kConverged;
        break;
      }
      // Subproblem solved but infeasible and no descent direction left:
      // sigma lies below the attainable residual.
      if (g_norm <= 1e-12 * std::max(1.0, r_norm)) {
        exit_code = kInfeasible;
        break;
      }
      if (r_error1 <= opt_tol && boosts < 30) {
        // Root located from the infeasible side. Newton approaches tau* from
        // below, so overshoot the step to land on the feasible side; the
        // one-norm excess stays within the solver tolerance.
        tau += 1.5 * r_norm * a_error1 / g_norm;
        f_old = s.f;
        ++boosts;
        boosted = true;
      }
    }

    // Newton update of tau when progress at the current budget stalls.
    const bool rel_change_small = std::abs(s.f - f_old) <= kDecTol * s.f;
    const bool rel_change_tiny = std::abs(s.f - f_old) <= 1e-1 * s.f * std::abs(a_error1);
    const bool update_tau = !boosted &&
                            ((rel_change_small && r_norm > 2.0 * sigma) ||
                             (rel_change_tiny && r_norm <= 2.0 * sigma)) &&
                            g_norm > 0.0;
    if (update_tau) {
      const double tau_new = std::max(0.0, tau + r_norm * a_error1 / g_norm);
      f_old = s.f;
      if (tau_new < tau) {
        s.x = project_l1(s.x, tau_new);
        s.r = b - a * s.x;
        s.f = 0.5 * s.r.squaredNorm();
        s.g = -(a.transpose() * s.r);
        std::fill(last_f.begin(), last_f.end(), -std::numeric_limits<double>::infinity());
        last_f[0] = s.f;
      }
      tau = tau_new;
    }

    if (iter >= max_iter) {
      exit_code = kIterations;
      break;
    }
    ++iter;

    // --- projected line search along the scaled-gradient arc ---
    const Vector x_prev = s.x;
    const Vector g_prev = s.g;
    const double f_max = *std::max_element(last_f.begin(), last_f.end());

    bool ls_ok = false;
    {
      double alpha = 1.0;
      double scale = 1.0;
      double prev_dx_norm = -1.0;
      int safeguards = 0;
      for (int ls = 0; ls < 14; ++ls) {
        Vector x_new = project_l1(x_prev - (alpha * scale * g_step) * g_prev, tau);
        Vector r_new = b - a * x_new;
        const double f_new = 0.5 * r_new.squaredNorm();
        const Vector dx = x_new - x_prev;
        const double gtd = scale * g_prev.dot(dx);
        if (gtd >= 0.0) break;  // not a descent arc
        if (f_new < f_max + kArmijo * alpha * gtd) {
          s.x = std::move(x_new);
          s.r = std::move(r_new);
          s.f = f_new;
          ls_ok = true;
          break;
        }
        alpha *= 0.5;
        const double dx_norm = dx.norm() / std::sqrt(static_cast<double>(n));
        if (prev_dx_norm >= 0.0 && std::abs(dx_norm - prev_dx_norm) <= 1e-6 * dx_norm) {
          const double g_dir_norm = g_prev.norm() / std::sqrt(static_cast<double>(n));
          scale = dx_norm / g_dir_norm / std::pow(2.0, safeguards);
          ++safeguards;
        }
        prev_dx_norm = dx_norm;
      }
    }

    if (!ls_ok) {
      // Fallback: feasible-direction nonmonotone search with quadratic
      // interpolation backtracking.
      const Vector dx = project_l1(x_prev - g_step * g_prev, tau) - x_prev;
      const double gtd = -std::abs(g_prev.dot(dx));
      double alpha = 1.0;
      for (int ls = 0; ls < 14; ++ls) {
        Vector x_new = x_prev + alpha * dx;
        Vector r_new = b - a * x_new;
        const double f_new = 0.5 * r_new.squaredNorm();
        if (f_new < f_max + kArmijo * alpha * gtd) {
          s.x = std::move(x_new);
          s.r = std::move(r_new);
          s.f = f_new;
          ls_ok = true;
          break;
        }
        double next;
        if (alpha <= 0.1) {
          next = alpha * 0.5;
        } else {
          next = -gtd * alpha * alpha / (2.0 * (f_new - s.f - alpha * gtd));
          if (!(next >= 0.1 * alpha) || !(next <= 0.9 * alpha) || !std::isfinite(next))
            next = alpha * 0.5;
        }
        alpha = next;
      }
      if (!ls_ok) {
        if (++line_errors >= 2) {
          exit_code = kLineError;
          break;
        }
        step_max /= 10.0;  // damp the BB scaling and retry
        g_step = std::min(g_step, step_max);
        continue;
      }
    }

    // Barzilai-Borwein step from the accepted move.
    s.g = -(a.transpose() * s.r);
    const Vector ds = s.x - x_prev;
    const Vector dg = s.g - g_prev;
    const double sty = ds.dot(dg);
    g_step = sty <= 0.0 ? step_max
                        : std::min(step_max, std::max(kStepMin, ds.squaredNorm() / sty));

    if (s.f > 0.5 * sigma * sigma) {
      last_f[iter % kHistory] = s.f;
      if (s.f < f_best) {
        f_best = s.f;
        x_best = s.x;
      }
    }
  }

  // Keep the best feasible-side iterate seen, as the final subproblem may
  // have overshot.
  if (exit_code != kNone && s.f > f_best) {
    s.x = x_best;
    s.r = b - a * s.x;
  }

  report.coefficients = s.x;
  report.residual_norm = (b - a * s.x).norm();
  report.iterations = iter;
  report.converged = exit_code == kConverged && report.residual_norm <= feasible_bound;
  return report;
}

}  // namespace

SolveReport solve_bpdn(const BPDNProblem& problem, double tol, int max_iter) {
  const Eigen::Index m = problem.Psi.rows();
  const Eigen::Index n = problem.Psi.cols();
  if (m < 1 || n < 1) throw std::invalid_argument("solve_bpdn: empty system");
  if (problem.u.size() != m) throw std::invalid_argument("solve_bpdn: rhs length mismatch");
  if (problem.epsilon < 0.0) throw std::invalid_argument("solve_bpdn: negative epsilon");

  if (problem.weights.size() == 0)
    return spgl1_solve(problem.Psi, problem.u, problem.epsilon, tol, max_iter);

  if (problem.weights.size() != n)
    throw std::invalid_argument("solve_bpdn: weight length mismatch");
  if ((problem.weights.array() <= 0.0).any())
    throw std::invalid_argument("solve_bpdn: weights must be strictly positive");

  // Substitution c~ = W c: scale columns by 1/w and map the solution back.
  const Vector inv_w = problem.weights.cwiseInverse();
  RowMatrix scaled = problem.Psi;
  for (Eigen::Index j = 0; j < n; ++j) scaled.col(j) *= inv_w[j];
  SolveReport report = spgl1_solve(scaled, problem.u, problem.epsilon, tol, max_iter);
  report.coefficients = report.coefficients.cwiseProduct(inv_w);
  return report;
}

SolveReport solve_reweighted(const BPDNProblem& problem, double gamma, int n_iter, double tol,
                             int max_iter) {
  if (n_iter < 1) throw std::invalid_argument("solve_reweighted: n_iter must be >= 1");
  BPDNProblem current = problem;
  current.weights = Vector();
  SolveReport report = solve_bpdn(current, tol, max_iter);
  for (int it = 1; it < n_iter; ++it) {
    if (!report.converged) return report;
    const double scale = report.coefficients.cwiseAbs().maxCoeff();
    if (scale == 0.0 && gamma <= 0.0) {
      current.weights = Vector::Ones(problem.Psi.cols());  // reweighting is a no-op at c = 0
    } else {
      const double damping = gamma > 0.0 ? gamma : 1e-4 * scale;
      current.weights = (report.coefficients.cwiseAbs().array() + damping).inverse().matrix();
    }
    report = solve_bpdn(current, tol, max_iter);
  }
  return report;
}

LeastSquaresResult solve_least_squares(const RowMatrix& Psi, const Vector& u) {
  if (Psi.rows() != u.size()) throw std::invalid_argument("solve_least_squares: size mismatch");
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Matrix(Psi));
  LeastSquaresResult result;
  result.coefficients = cod.solve(u);
  result.rank_deficient = cod.rank() < std::min(Psi.rows(), Psi.cols());
  return result;
}

namespace {

std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = hi;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / (points - 1);
  for (int i = 0; i < points; ++i) grid[i] = std::exp(std::log(lo) + step * i);
  return grid;
}

CrossValidationResult cross_validate_impl(const RowMatrix& Psi, const Vector& u,
                                          const std::vector<double>& explicit_grid,
                                          const CrossValidationOptions& options) {
  const Eigen::Index m = Psi.rows();
  if (!(options.split_ratio > 0.0 && options.split_ratio < 1.0))
    throw std::invalid_argument("cross_validate_epsilon: split_ratio must be in (0, 1)");
  if (options.n_folds < 1) throw std::invalid_argument("cross_validate_epsilon: n_folds >= 1");
  const Eigen::Index m_r =
      std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::lround(options.split_ratio * m)), 1,
                               m - 1);
  const Eigen::Index m_v = m - m_r;

  const bool auto_grid = explicit_grid.empty();
  const int n_cand = auto_grid ? options.grid_points : static_cast<int>(explicit_grid.size());
  if (n_cand < 1) throw std::invalid_argument("cross_validate_epsilon: empty candidate grid");

  struct Fold {
    RowMatrix psi_r, psi_v;
    Vector u_r, u_v;
    std::vector<double> grid;
  };
  std::vector<Fold> folds(options.n_folds);
  for (int f = 0; f < options.n_folds; ++f) {
    std::vector<Eigen::Index> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = make_rng(options.seed, {0x6376666f6c64ULL, static_cast<std::uint64_t>(f)});
    std::shuffle(perm.begin(), perm.end(), rng);
    Fold& fold = folds[f];
    fold.psi_r.resize(m_r, Psi.cols());
    fold.psi_v.resize(m_v, Psi.cols());
    fold.u_r.resize(m_r);
    fold.u_v.resize(m_v);
    for (Eigen::Index i = 0; i < m_r; ++i) {
      fold.psi_r.row(i) = Psi.row(perm[i]);
      fold.u_r[i] = u[perm[i]];
    }
    for (Eigen::Index i = 0; i < m_v; ++i) {
      fold.psi_v.row(i) = Psi.row(perm[m_r + i]);
      fold.u_v[i] = u[perm[m_r + i]];
    }
    fold.grid = auto_grid ? log_grid(options.grid_lo * fold.u_r.norm(),
                                     options.grid_hi * fold.u_r.norm(), n_cand)
                          : explicit_grid;
  }

  Matrix errors(options.n_folds, n_cand);
  std::vector<char> ok(static_cast<std::size_t>(options.n_folds) * n_cand, 0);
  parallel_for(static_cast<std::size_t>(options.n_folds) * n_cand, options.workers,
               [&](std::size_t task) {
                 const int f = static_cast<int>(task) / n_cand;
                 const int c = static_cast<int>(task) % n_cand;
                 const Fold& fold = folds[f];
                 BPDNProblem sub{fold.psi_r, fold.u_r, fold.grid[c], Vector()};
                 SolveReport rep = solve_bpdn(sub, options.solver_tol, options.solver_max_iter);
                 errors(f, c) = (fold.psi_v * rep.coefficients - fold.u_v).norm();
                 ok[task] = rep.converged ? 1 : 0;
               });
  if (std::none_of(ok.begin(), ok.end(), [](char c) { return c != 0; }))
    throw std::runtime_error("cross_validate_epsilon: no solve converged on any fold");

  CrossValidationResult result;
  result.candidates.resize(n_cand);
  result.validation_errors.resize(n_cand);
  for (int c = 0; c < n_cand; ++c) {
    double cand_mean = 0.0, err_mean = 0.0;
    for (int f = 0; f < options.n_folds; ++f) {
      cand_mean += folds[f].grid[c];
      err_mean += errors(f, c);
    }
    result.candidates[c] = cand_mean / options.n_folds;
    result.validation_errors[c] = err_mean / options.n_folds;
  }
  const auto best = std::min_element(result.validation_errors.begin(),
                                     result.validation_errors.end());
  const int best_idx = static_cast<int>(best - result.validation_errors.begin());
  result.best_candidate = result.candidates[best_idx];
  result.epsilon = std::sqrt(static_cast<double>(m) / static_cast<double>(m_r)) *
                   result.best_candidate;
  return result;
}

}  // namespace

CrossValidationResult cross_validate_epsilon(const RowMatrix& Psi, const Vector& u,
                                             const std::vector<double>& candidate_grid,
                                             const CrossValidationOptions& options) {
  if (candidate_grid.empty())
    throw std::invalid_argument("cross_validate_epsilon: candidate grid must be non-empty");
  return cross_validate_impl(Psi, u, candidate_grid, options);
}

CrossValidationResult cross_validate_epsilon_auto(const RowMatrix& Psi, const Vector& u,
                                                  const CrossValidationOptions& options) {
  return cross_validate_impl(Psi, u, {}, options);
}

}  // namespace pdfest
