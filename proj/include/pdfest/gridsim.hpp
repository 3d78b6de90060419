#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdfest/klexp.hpp"
#include "pdfest/types.hpp"

namespace pdfest {

struct BusData {
  int id = 0;                          // external 1-based id
  std::complex<double> load{0.0, 0.0};  // consumed P + jQ, p.u.
};

struct BranchData {
  int from = 0;
  int to = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double charging = 0.0;  // total line charging susceptance
};

struct GeneratorData {
  int bus = 0;
  double inertia = 0.0;    // H, s
  double damping = 0.0;    // D, p.u.
  double xd_prime = 0.0;   // transient reactance, p.u.
  double emf = 0.0;        // E, p.u.; 0 means "compute from power flow"
  double v_set = 1.0;      // terminal voltage setpoint
};

/// Classical-machine grid model. Bus ids are external; index helpers map to
/// the dense 0-based ordering used by the matrices.
struct GridModel {
  std::vector<BusData> buses;
  std::vector<BranchData> branches;
  std::vector<GeneratorData> generators;
  double omega_base = 2.0 * 3.14159265358979323846 * 60.0;  // rad/s
  double omega_sync = 1.0;  // p.u.
  ComplexMatrix ybus;       // n_bus x n_bus, built on load

  int n_bus() const { return static_cast<int>(buses.size()); }
  int n_gen() const { return static_cast<int>(generators.size()); }
  int bus_index(int external_id) const;
};

/// Parses the sectioned grid-data text format (see data/wecc9.grid) and
/// assembles the bus admittance matrix.
GridModel load_grid_file(const std::string& path);

struct PowerFlowResult {
  ComplexVector v;          // complex bus voltages
  Vector gen_p;             // active injection per generator (slack solved)
  Vector gen_q;             // reactive injection per generator
  int iterations = 0;
};

/// Minimal Newton-Raphson AC power flow: generator buses are PV at their
/// setpoints, the slack generator's bus fixes angle and voltage.
PowerFlowResult solve_power_flow(const GridModel& model, const Vector& gen_p_set,
                                 int slack_gen = 0, double tol = 1e-10, int max_iter = 50);

/// Constant-impedance conversion of the declared loads at the given bus
/// voltages: y = conj(S) / |V|^2.
ComplexVector constant_impedance_loads(const GridModel& model, const ComplexVector& v);

struct ReducedNetwork {
  Matrix G;  // transfer conductances, n_gen x n_gen
  Matrix B;  // transfer susceptances
};

/// Kron reduction to the generator internal nodes. The augmented admittance
/// is Ybus + load admittances + the x'd branches; a faulted bus is grounded
/// through fault_impedance before elimination.
ReducedNetwork kron_reduce(const GridModel& model, const ComplexVector& load_admittance,
                           std::optional<int> faulted_bus = {}, double fault_impedance = 1e-7);

/// P^e_k = sum_i E_k E_i (G_ki cos(d_k - d_i) + B_ki sin(d_k - d_i)).
Vector electrical_power(const ReducedNetwork& reduced, const Vector& emf, const Vector& delta);

struct FaultSchedule {
  int fault_bus = 0;     // external id
  double t_on = 0.0;     // s
  double duration = 0.0;  // s
};

struct TrajectoryState {
  Vector delta;  // rotor angles, rad
  Vector omega;  // angular velocity as per-unit deviation from synchronous
  double t = 0.0;
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(double when)
      : std::runtime_error("simulation diverged (non-finite state) at t = " +
                           std::to_string(when)),
        time(when) {}
  double time;
};

/// Mechanical power prescription for one generator: constant at mean_power,
/// plus a lognormal K-L fluctuation when std_power > 0.
struct InjectionSpec {
  double mean_power = 0.0;
  double std_power = 0.0;
  InjectionOptions options;
};

struct SimulationOptions {
  double t_max = 10.0;
  double dt = 1e-3;
  int slack_gen = 0;
  std::optional<TrajectoryState> initial_state;  // default: computed equilibrium
};

/// Immutable per-(model, schedule, dt) state shared by ensemble runs:
/// power flow, Kron-reduced topologies, the exact mechanical equilibrium,
/// injection processes, and the K-L forcing tables on the RK4 stage grid.
class PreparedSimulation {
 public:
  PreparedSimulation(const GridModel& model, const std::vector<InjectionSpec>& injections,
                     const std::optional<FaultSchedule>& schedule,
                     const SimulationOptions& options);

  /// Integrates the swing equations with RK4 for one input sample.
  /// xi stacks the K-L variables of the driven generators in generator
  /// order; throws DivergenceError on non-finite states.
  TrajectoryState run(const Vector& xi, std::vector<TrajectoryState>* trajectory = nullptr) const;

  int stochastic_dimension() const { return stochastic_dim_; }
  const Vector& equilibrium_angles() const { return equilibrium_delta_; }
  const Vector& emf() const { return emf_; }
  /// Mean mechanical powers actually used; the slack entry is the value
  /// balancing the network at equilibrium.
  const Vector& mean_power() const { return mean_power_; }
  const ReducedNetwork& prefault_network() const { return prefault_; }
  double dt() const { return dt_; }
  double t_max() const { return t_max_; }
  int n_gen() const { return static_cast<int>(emf_.size()); }
  const std::vector<InjectionModel>& injection_models() const { return injection_models_; }

 private:
  ReducedNetwork prefault_, fault_, postfault_;
  Vector emf_, equilibrium_delta_, mean_power_;
  Vector inertia_, damping_;
  double omega_base_ = 0.0;
  double dt_ = 0.0, t_max_ = 0.0;
  int steps_ = 0;
  int fault_on_step_ = -1, fault_off_step_ = -1;
  int stochastic_dim_ = 0;
  std::vector<InjectionModel> injection_models_;  // per generator
  std::vector<int> driven_;                       // generator indices with terms > 0
  std::vector<Matrix> forcing_tables_;            // per driven gen, (2*steps+1) x d_k
  std::optional<TrajectoryState> initial_state_;
};

/// Convenience single-shot wrapper around PreparedSimulation.
TrajectoryState simulate(const GridModel& model, const std::vector<InjectionSpec>& injections,
                         const Vector& xi, const std::optional<FaultSchedule>& schedule,
                         const SimulationOptions& options,
                         std::vector<TrajectoryState>* trajectory = nullptr);

/// u = omega_k(t_max) - omega_ref(t_max), in the stored per-unit deviation.
double qoi_relative_speed(const TrajectoryState& state, int k, int ref);

/// Damped Newton solve of P^e(delta) = P^m with the slack angle fixed at 0.
/// Returns the angles; the slack equation is dropped and its injection is
/// balanced afterwards by the caller.
Vector solve_equilibrium(const ReducedNetwork& reduced, const Vector& emf, const Vector& p_mech,
                         int slack_gen, const Vector& initial_guess, double tol = 1e-12,
                         int max_iter = 50);

/// Largest post-clearing relative-angle excursion from equilibrium, the
/// classifier behind the critical-clearing-time search.
double max_relative_angle_excursion(const PreparedSimulation& sim, const Vector& xi,
                                    double t_clear);

/// Bisection on the fault duration between re-synchronizing and diverging
/// runs of the noise-free system. Returns the bracketed clearing time.
double critical_clearing_time(const GridModel& model, const std::vector<InjectionSpec>& injections,
                              int fault_bus, double t_on, const SimulationOptions& options,
                              double lo = 0.01, double hi = 0.6, double tol = 1e-3,
                              double angle_bound = 3.14159265358979323846);

}  // namespace pdfest
