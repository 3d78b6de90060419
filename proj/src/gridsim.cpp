#include "pdfest/gridsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pdfest {

int GridModel::bus_index(int external_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == external_id) return static_cast<int>(i);
  throw std::invalid_argument("GridModel: unknown bus id " + std::to_string(external_id));
}

namespace {

void build_ybus(GridModel& model) {
  const int n = model.n_bus();
  model.ybus = ComplexMatrix::Zero(n, n);
  for (const BranchData& br : model.branches) {
    const int i = model.bus_index(br.from);
    const int j = model.bus_index(br.to);
    const std::complex<double> y = 1.0 / std::complex<double>(br.resistance, br.reactance);
    const std::complex<double> shunt(0.0, 0.5 * br.charging);
    model.ybus(i, i) += y + shunt;
    model.ybus(j, j) += y + shunt;
    model.ybus(i, j) -= y;
    model.ybus(j, i) -= y;
  }
}

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream stream(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (stream >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace

GridModel load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_grid_file: cannot open " + path);
  GridModel model;
  double frequency = 60.0;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const auto fail = [&](const std::string& what) {
      throw std::runtime_error("load_grid_file: " + what + " at " + path + ":" +
                               std::to_string(line_no));
    };
    if (tokens[0].front() == '[') {
      section = tokens[0];
      continue;
    }
    if (section.empty()) {
      if (tokens.size() != 2) fail("expected 'key value' before the first section");
      if (tokens[0] == "frequency_hz")
        frequency = std::stod(tokens[1]);
      else if (tokens[0] == "base_mva") {
        // informational; all quantities in the file are already per-unit
      } else
        fail("unknown key '" + tokens[0] + "'");
    } else if (section == "[buses]") {
      if (tokens.size() != 3) fail("bus rows are 'id load_P load_Q'");
      BusData bus;
      bus.id = std::stoi(tokens[0]);
      bus.load = {std::stod(tokens[1]), std::stod(tokens[2])};
      model.buses.push_back(bus);
    } else if (section == "[branches]") {
      if (tokens.size() != 5) fail("branch rows are 'from to R X B'");
      BranchData br;
      br.from = std::stoi(tokens[0]);
      br.to = std::stoi(tokens[1]);
      br.resistance = std::stod(tokens[2]);
      br.reactance = std::stod(tokens[3]);
      br.charging = std::stod(tokens[4]);
      model.branches.push_back(br);
    } else if (section == "[generators]") {
      if (tokens.size() != 5 && tokens.size() != 6)
        fail("generator rows are 'bus H D xd_prime V_set [E]'");
      GeneratorData gen;
      gen.bus = std::stoi(tokens[0]);
      gen.inertia = std::stod(tokens[1]);
      gen.damping = std::stod(tokens[2]);
      gen.xd_prime = std::stod(tokens[3]);
      gen.v_set = std::stod(tokens[4]);
      if (tokens.size() == 6) gen.emf = std::stod(tokens[5]);
      model.generators.push_back(gen);
    } else {
      fail("unknown section " + section);
    }
  }
  if (model.buses.empty() || model.generators.empty())
    throw std::runtime_error("load_grid_file: " + path + " has no buses or no generators");
  std::set<int> seen;
  for (const BusData& bus : model.buses)
    if (!seen.insert(bus.id).second)
      throw std::runtime_error("load_grid_file: duplicate bus id " + std::to_string(bus.id));
  std::set<int> gen_buses;
  for (const GeneratorData& gen : model.generators) {
    model.bus_index(gen.bus);  // validates the reference
    if (!(gen.inertia > 0.0))
      throw std::runtime_error("load_grid_file: generator inertia must be positive");
    if (gen.damping < 0.0)
      throw std::runtime_error("load_grid_file: generator damping must be non-negative");
    if (!(gen.xd_prime > 0.0))
      throw std::runtime_error("load_grid_file: generator x'd must be positive");
    if (!gen_buses.insert(gen.bus).second)
      throw std::runtime_error("load_grid_file: one generator per bus is supported");
  }
  model.omega_base = 2.0 * M_PI * frequency;
  build_ybus(model);
  return model;
}

PowerFlowResult solve_power_flow(const GridModel& model, const Vector& gen_p_set, int slack_gen,
                                 double tol, int max_iter) {
  const int n = model.n_bus();
  const int ng = model.n_gen();
  if (gen_p_set.size() != ng)
    throw std::invalid_argument("solve_power_flow: one scheduled P per generator required");
  if (slack_gen < 0 || slack_gen >= ng)
    throw std::invalid_argument("solve_power_flow: bad slack generator index");

  std::vector<int> bus_gen(n, -1);
  for (int g = 0; g < ng; ++g) bus_gen[model.bus_index(model.generators[g].bus)] = g;
  const int slack_bus = model.bus_index(model.generators[slack_gen].bus);

  Vector theta = Vector::Zero(n);
  Vector vm(n);
  Vector p_sched = Vector::Zero(n), q_sched = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    vm[i] = bus_gen[i] >= 0 ? model.generators[bus_gen[i]].v_set : 1.0;
    p_sched[i] -= model.buses[i].load.real();
    q_sched[i] -= model.buses[i].load.imag();
    if (bus_gen[i] >= 0) p_sched[i] += gen_p_set[bus_gen[i]];
  }

  const Matrix g_mat = model.ybus.real();
  const Matrix b_mat = model.ybus.imag();

  // Unknown ordering: angles at all non-slack buses, then magnitudes at PQ buses.
  std::vector<int> ang_idx, mag_idx;
  for (int i = 0; i < n; ++i) {
    if (i != slack_bus) ang_idx.push_back(i);
    if (bus_gen[i] < 0) mag_idx.push_back(i);
  }
  const int na = static_cast<int>(ang_idx.size());
  const int nm = static_cast<int>(mag_idx.size());

  Vector p_calc(n), q_calc(n);
  auto compute_injections = [&] {
    for (int i = 0; i < n; ++i) {
      double p = 0.0, q = 0.0;
      for (int j = 0; j < n; ++j) {
        const double tij = theta[i] - theta[j];
        const double c = std::cos(tij), s = std::sin(tij);
        p += vm[i] * vm[j] * (g_mat(i, j) * c + b_mat(i, j) * s);
        q += vm[i] * vm[j] * (g_mat(i, j) * s - b_mat(i, j) * c);
      }
      p_calc[i] = p;
      q_calc[i] = q;
    }
  };

  int iterations = 0;
  for (; iterations < max_iter; ++iterations) {
    compute_injections();
    Vector mismatch(na + nm);
    for (int a = 0; a < na; ++a) mismatch[a] = p_calc[ang_idx[a]] - p_sched[ang_idx[a]];
    for (int m = 0; m < nm; ++m) mismatch[na + m] = q_calc[mag_idx[m]] - q_sched[mag_idx[m]];
    if (mismatch.lpNorm<Eigen::Infinity>() < tol) break;

    Matrix jac = Matrix::Zero(na + nm, na + nm);
    for (int a = 0; a < na; ++a) {
      const int i = ang_idx[a];
      for (int b = 0; b < na; ++b) {
        const int j = ang_idx[b];
        if (i == j) {
          jac(a, b) = -q_calc[i] - b_mat(i, i) * vm[i] * vm[i];
        } else {
          const double tij = theta[i] - theta[j];
          jac(a, b) = vm[i] * vm[j] * (g_mat(i, j) * std::sin(tij) - b_mat(i, j) * std::cos(tij));
        }
      }
      for (int m = 0; m < nm; ++m) {
        const int j = mag_idx[m];
        if (i == j) {
          jac(a, na + m) = p_calc[i] / vm[i] + g_mat(i, i) * vm[i];
        } else {
          const double tij = theta[i] - theta[j];
          jac(a, na + m) = vm[i] * (g_mat(i, j) * std::cos(tij) + b_mat(i, j) * std::sin(tij));
        }
      }
    }
    for (int m = 0; m < nm; ++m) {
      const int i = mag_idx[m];
      for (int b = 0; b < na; ++b) {
        const int j = ang_idx[b];
        if (i == j) {
          jac(na + m, b) = p_calc[i] - g_mat(i, i) * vm[i] * vm[i];
        } else {
          const double tij = theta[i] - theta[j];
          jac(na + m, b) =
              -vm[i] * vm[j] * (g_mat(i, j) * std::cos(tij) + b_mat(i, j) * std::sin(tij));
        }
      }
      for (int m2 = 0; m2 < nm; ++m2) {
        const int j = mag_idx[m2];
        if (i == j) {
          jac(na + m, na + m2) = q_calc[i] / vm[i] - b_mat(i, i) * vm[i];
        } else {
          const double tij = theta[i] - theta[j];
          jac(na + m, na + m2) =
              vm[i] * (g_mat(i, j) * std::sin(tij) - b_mat(i, j) * std::cos(tij));
        }
      }
    }

    const Vector step = jac.partialPivLu().solve(mismatch);
    if (!step.allFinite())
      throw std::runtime_error("solve_power_flow: singular Jacobian");
    for (int a = 0; a < na; ++a) theta[ang_idx[a]] -= step[a];
    for (int m = 0; m < nm; ++m) vm[mag_idx[m]] -= step[na + m];
  }
  if (iterations == max_iter)
    throw std::runtime_error("solve_power_flow: Newton iteration did not converge");

  compute_injections();
  PowerFlowResult result;
  result.iterations = iterations;
  result.v.resize(n);
  for (int i = 0; i < n; ++i) result.v[i] = std::polar(vm[i], theta[i]);
  result.gen_p.resize(ng);
  result.gen_q.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const int i = model.bus_index(model.generators[g].bus);
    result.gen_p[g] = p_calc[i] + model.buses[i].load.real();
    result.gen_q[g] = q_calc[i] + model.buses[i].load.imag();
  }
  return result;
}

ComplexVector constant_impedance_loads(const GridModel& model, const ComplexVector& v) {
  const int n = model.n_bus();
  if (v.size() != n) throw std::invalid_argument("constant_impedance_loads: voltage size mismatch");
  ComplexVector y = ComplexVector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const std::complex<double> s = model.buses[i].load;
    if (s != std::complex<double>(0.0, 0.0)) y[i] = std::conj(s) / std::norm(v[i]);
  }
  return y;
}

ReducedNetwork kron_reduce(const GridModel& model, const ComplexVector& load_admittance,
                           std::optional<int> faulted_bus, double fault_impedance) {
  const int n = model.n_bus();
  const int ng = model.n_gen();
  if (load_admittance.size() != n)
    throw std::invalid_argument("kron_reduce: load admittance size mismatch");

  ComplexMatrix ynn = model.ybus;
  ynn.diagonal() += load_admittance;
  ComplexMatrix ygn = ComplexMatrix::Zero(ng, n);
  ComplexMatrix ygg = ComplexMatrix::Zero(ng, ng);
  for (int g = 0; g < ng; ++g) {
    const int t = model.bus_index(model.generators[g].bus);
    const std::complex<double> y = 1.0 / std::complex<double>(0.0, model.generators[g].xd_prime);
    ygg(g, g) = y;
    ygn(g, t) = -y;
    ynn(t, t) += y;
  }
  if (faulted_bus) {
    const int f = model.bus_index(*faulted_bus);
    ynn(f, f) += 1.0 / std::complex<double>(fault_impedance, 0.0);
  }

  Eigen::FullPivLU<ComplexMatrix> lu(ynn);
  if (!lu.isInvertible())
    throw std::runtime_error("kron_reduce: interior admittance block is singular");
  const ComplexMatrix reduced = ygg - ygn * lu.solve(ygn.transpose());

  ReducedNetwork out;
  out.G = reduced.real();
  out.B = reduced.imag();
  return out;
}

Vector electrical_power(const ReducedNetwork& reduced, const Vector& emf, const Vector& delta) {
  const int n = static_cast<int>(emf.size());
  if (reduced.G.rows() != n || reduced.B.rows() != n || delta.size() != n)
    throw std::invalid_argument("electrical_power: dimension mismatch");
  Vector p(n);
  for (int k = 0; k < n; ++k) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dki = delta[k] - delta[i];
      sum += emf[i] * (reduced.G(k, i) * std::cos(dki) + reduced.B(k, i) * std::sin(dki));
    }
    p[k] = emf[k] * sum;
  }
  return p;
}

Vector solve_equilibrium(const ReducedNetwork& reduced, const Vector& emf, const Vector& p_mech,
                         int slack_gen, const Vector& initial_guess, double tol, int max_iter) {
  const int n = static_cast<int>(emf.size());
  Vector delta = initial_guess;
  delta.array() -= initial_guess[slack_gen];

  std::vector<int> free_idx;
  for (int k = 0; k < n; ++k)
    if (k != slack_gen) free_idx.push_back(k);
  const int m = static_cast<int>(free_idx.size());
  if (m == 0) return delta;

  auto residual = [&](const Vector& d) {
    const Vector pe = electrical_power(reduced, emf, d);
    Vector r(m);
    for (int a = 0; a < m; ++a) r[a] = pe[free_idx[a]] - p_mech[free_idx[a]];
    return r;
  };

  Vector r = residual(delta);
  for (int it = 0; it < max_iter; ++it) {
    if (r.lpNorm<Eigen::Infinity>() < tol) return delta;
    Matrix jac(m, m);
    for (int a = 0; a < m; ++a) {
      const int k = free_idx[a];
      for (int b = 0; b < m; ++b) {
        const int j = free_idx[b];
        if (k == j) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i) {
            if (i == k) continue;
            const double dki = delta[k] - delta[i];
            acc += emf[k] * emf[i] *
                   (-reduced.G(k, i) * std::sin(dki) + reduced.B(k, i) * std::cos(dki));
          }
          jac(a, b) = acc;
        } else {
          const double dkj = delta[k] - delta[j];
          jac(a, b) = emf[k] * emf[j] *
                      (reduced.G(k, j) * std::sin(dkj) - reduced.B(k, j) * std::cos(dkj));
        }
      }
    }
    const Vector step = jac.partialPivLu().solve(r);
    if (!step.allFinite()) throw std::runtime_error("solve_equilibrium: singular Jacobian");
    // Damped update: halve until the residual decreases.
    double lambda = 1.0;
    const double r_norm = r.norm();
    for (int half = 0; half < 40; ++half) {
      Vector trial = delta;
      for (int a = 0; a < m; ++a) trial[free_idx[a]] -= lambda * step[a];
      Vector r_trial = residual(trial);
      if (r_trial.norm() <= r_norm * (1.0 - 1e-4 * lambda) || r_trial.norm() < tol) {
        delta = trial;
        r = r_trial;
        break;
      }
      lambda *= 0.5;
      if (half == 39) throw std::runtime_error("solve_equilibrium: line search failed");
    }
  }
  if (r.lpNorm<Eigen::Infinity>() >= tol)
    throw std::runtime_error("solve_equilibrium: Newton iteration did not converge");
  return delta;
}

PreparedSimulation::PreparedSimulation(const GridModel& model,
                                       const std::vector<InjectionSpec>& injections,
                                       const std::optional<FaultSchedule>& schedule,
                                       const SimulationOptions& options) {
  const int ng = model.n_gen();
  if (static_cast<int>(injections.size()) != ng)
    throw std::invalid_argument("PreparedSimulation: one injection spec per generator required");
  if (!(options.dt > 0.0) || !(options.t_max > 0.0))
    throw std::invalid_argument("PreparedSimulation: dt and t_max must be positive");

  dt_ = options.dt;
  steps_ = static_cast<int>(std::lround(options.t_max / options.dt));
  if (steps_ < 1) throw std::invalid_argument("PreparedSimulation: t_max shorter than dt");
  t_max_ = steps_ * dt_;
  omega_base_ = model.omega_base;

  Vector means(ng);
  for (int g = 0; g < ng; ++g) means[g] = injections[g].mean_power;

  const PowerFlowResult pf = solve_power_flow(model, means, options.slack_gen);
  const ComplexVector loads = constant_impedance_loads(model, pf.v);
  prefault_ = kron_reduce(model, loads, std::nullopt);
  postfault_ = prefault_;
  if (schedule) {
    if (!(schedule->t_on >= 0.0) || !(schedule->duration > 0.0) ||
        schedule->t_on + schedule->duration > t_max_ + 0.5 * dt_)
      throw std::invalid_argument("PreparedSimulation: fault schedule outside [0, t_max]");
    fault_ = kron_reduce(model, loads, schedule->fault_bus);
    fault_on_step_ = static_cast<int>(std::lround(schedule->t_on / dt_));
    fault_off_step_ = static_cast<int>(std::lround((schedule->t_on + schedule->duration) / dt_));
    fault_off_step_ = std::min(fault_off_step_, steps_);
  } else {
    fault_ = prefault_;
  }

  emf_.resize(ng);
  Vector delta0(ng);
  inertia_.resize(ng);
  damping_.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const GeneratorData& gen = model.generators[g];
    inertia_[g] = gen.inertia;
    damping_[g] = gen.damping;
    const int t = model.bus_index(gen.bus);
    const std::complex<double> s(pf.gen_p[g], pf.gen_q[g]);
    const std::complex<double> current = std::conj(s) / std::conj(pf.v[t]);
    const std::complex<double> e_phasor =
        pf.v[t] + std::complex<double>(0.0, gen.xd_prime) * current;
    emf_[g] = gen.emf > 0.0 ? gen.emf : std::abs(e_phasor);
    delta0[g] = std::arg(e_phasor);
  }

  equilibrium_delta_ = solve_equilibrium(prefault_, emf_, means, options.slack_gen, delta0);
  mean_power_ = means;
  // The slack generator's injection is set to the value balancing the
  // reduced network exactly; its configured mean is the power-flow schedule.
  mean_power_[options.slack_gen] =
      electrical_power(prefault_, emf_, equilibrium_delta_)[options.slack_gen];

  std::vector<double> half_times(2 * steps_ + 1);
  for (int j = 0; j <= 2 * steps_; ++j) half_times[j] = 0.5 * dt_ * j;

  injection_models_.reserve(ng);
  for (int g = 0; g < ng; ++g) {
    InjectionOptions opts = injections[g].options;
    if (opts.horizon < t_max_) opts.horizon = t_max_;
    injection_models_.push_back(
        make_injection_model(mean_power_[g], injections[g].std_power, opts));
    const InjectionModel& inj = injection_models_.back();
    if (inj.kl.terms > 0) {
      driven_.push_back(g);
      forcing_tables_.push_back(inj.kl.scaled_eigenfunction_table(half_times));
      stochastic_dim_ += inj.kl.terms;
    }
  }
  initial_state_ = options.initial_state;
}

TrajectoryState PreparedSimulation::run(const Vector& xi,
                                        std::vector<TrajectoryState>* trajectory) const {
  const int ng = n_gen();
  if (xi.size() != stochastic_dim_)
    throw std::invalid_argument("PreparedSimulation::run: xi length must be " +
                                std::to_string(stochastic_dim_));

  // Per-stage mechanical power for the driven generators.
  const int n_half = 2 * steps_ + 1;
  Matrix pm_driven(n_half, static_cast<Eigen::Index>(driven_.size()));
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < driven_.size(); ++k) {
    const InjectionModel& inj = injection_models_[driven_[k]];
    const Vector seg = xi.segment(offset, inj.kl.terms);
    offset += inj.kl.terms;
    pm_driven.col(k) =
        ((forcing_tables_[k] * seg).array() + inj.kl.mean_log).exp().matrix();
  }

  Vector delta = initial_state_ ? initial_state_->delta : equilibrium_delta_;
  Vector omega = initial_state_ ? initial_state_->omega : Vector::Zero(ng);
  if (delta.size() != ng || omega.size() != ng)
    throw std::invalid_argument("PreparedSimulation::run: bad initial state size");

  Vector pm(ng);
  Vector sin_d(ng), cos_d(ng);
  Vector k1d(ng), k1w(ng), k2d(ng), k2w(ng), k3d(ng), k3w(ng), k4d(ng), k4w(ng);
  Vector d_work(ng), w_work(ng);

  auto rhs = [&](const ReducedNetwork& net, const Vector& d, const Vector& w, int stage,
                 Vector& out_d, Vector& out_w) {
    for (int k = 0; k < ng; ++k) {
      sin_d[k] = std::sin(d[k]);
      cos_d[k] = std::cos(d[k]);
    }
    for (std::size_t k = 0; k < driven_.size(); ++k)
      pm[driven_[k]] = pm_driven(stage, static_cast<Eigen::Index>(k));
    for (int g = 0; g < ng; ++g)
      if (injection_models_[g].kl.terms == 0) pm[g] = mean_power_[g];
    for (int k = 0; k < ng; ++k) {
      double acc = 0.0;
      for (int i = 0; i < ng; ++i) {
        const double cos_ki = cos_d[k] * cos_d[i] + sin_d[k] * sin_d[i];
        const double sin_ki = sin_d[k] * cos_d[i] - cos_d[k] * sin_d[i];
        acc += emf_[i] * (net.G(k, i) * cos_ki + net.B(k, i) * sin_ki);
      }
      const double pe = emf_[k] * acc;
      out_d[k] = omega_base_ * w[k];
      out_w[k] = (-damping_[k] * w[k] - pe + pm[k]) / (2.0 * inertia_[k]);
    }
  };

  if (trajectory) {
    trajectory->clear();
    trajectory->reserve(steps_ + 1);
    trajectory->push_back({delta, omega, 0.0});
  }

  for (int step = 0; step < steps_; ++step) {
    const bool in_fault = step >= fault_on_step_ && step < fault_off_step_;
    const ReducedNetwork& net = in_fault ? fault_ : (step < fault_on_step_ ? prefault_ : postfault_);
    const int s0 = 2 * step;

    rhs(net, delta, omega, s0, k1d, k1w);
    d_work = delta + (0.5 * dt_) * k1d;
    w_work = omega + (0.5 * dt_) * k1w;
    rhs(net, d_work, w_work, s0 + 1, k2d, k2w);
    d_work = delta + (0.5 * dt_) * k2d;
    w_work = omega + (0.5 * dt_) * k2w;
    rhs(net, d_work, w_work, s0 + 1, k3d, k3w);
    d_work = delta + dt_ * k3d;
    w_work = omega + dt_ * k3w;
    rhs(net, d_work, w_work, s0 + 2, k4d, k4w);

    delta += (dt_ / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    omega += (dt_ / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);

    if (!delta.allFinite() || !omega.allFinite()) throw DivergenceError((step + 1) * dt_);
    if (trajectory) trajectory->push_back({delta, omega, (step + 1) * dt_});
  }
  return {delta, omega, t_max_};
}

TrajectoryState simulate(const GridModel& model, const std::vector<InjectionSpec>& injections,
                         const Vector& xi, const std::optional<FaultSchedule>& schedule,
                         const SimulationOptions& options,
                         std::vector<TrajectoryState>* trajectory) {
  PreparedSimulation prepared(model, injections, schedule, options);
  return prepared.run(xi, trajectory);
}

double qoi_relative_speed(const TrajectoryState& state, int k, int ref) {
  if (k < 0 || ref < 0 || k >= state.omega.size() || ref >= state.omega.size())
    throw std::invalid_argument("qoi_relative_speed: generator index out of range");
  return state.omega[k] - state.omega[ref];
}

double max_relative_angle_excursion(const PreparedSimulation& sim, const Vector& xi,
                                    double t_clear) {
  std::vector<TrajectoryState> trajectory;
  try {
    sim.run(xi, &trajectory);
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
  const Vector& eq = sim.equilibrium_angles();
  double worst = 0.0;
  for (const TrajectoryState& state : trajectory) {
    if (state.t < t_clear) continue;
    for (int k = 1; k < eq.size(); ++k) {
      const double rel = (state.delta[k] - state.delta[0]) - (eq[k] - eq[0]);
      worst = std::max(worst, std::abs(rel));
    }
  }
  return worst;
}

double critical_clearing_time(const GridModel& model, const std::vector<InjectionSpec>& injections,
                              int fault_bus, double t_on, const SimulationOptions& options,
                              double lo, double hi, double tol, double angle_bound) {
  std::vector<InjectionSpec> noise_free = injections;
  for (InjectionSpec& spec : noise_free) spec.std_power = 0.0;
  const Vector xi(0);

  auto stable = [&](double duration) {
    FaultSchedule schedule{fault_bus, t_on, duration};
    PreparedSimulation sim(model, noise_free, schedule, options);
    return max_relative_angle_excursion(sim, xi, t_on + duration) <= angle_bound;
  };

  if (!stable(lo))
    throw std::runtime_error("critical_clearing_time: lower bracket already unstable");
  if (stable(hi))
    throw std::runtime_error("critical_clearing_time: upper bracket still stable");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (stable(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pdfest
