#pragma once

#include "memfem/fem_core.hpp"
#include "memfem/linear_solvers.hpp"
#include "memfem/quadratic_model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace memfem {

struct PhaseFieldParams {
  double epsilon = 0.25;  // interface width
  double b = 20.0;        // line tension coefficient
  double Lambda = 0.0;    // spontaneous curvature per unit phi
  double alpha = 0.3;     // prescribed mean of phi
  double alpha1 = 1.0;    // mobility time scale of phi
  double alpha2 = 1.0;    // mobility time scale of u
  /// Progress per step is capped by the stabilization, so steps well beyond
  /// the relaxation time of phi are safe and cost nothing in accuracy of the
  /// stationary state; they do distort the transient.
  double tau = 1.0;
  double t_end = 1e6;
  /// Stop once the rate of change max(|phi_t|, |u_t|) that the flow equations
  /// give at the current state falls below this. Unlike the difference
  /// quotient of two iterates it does not depend on tau.
  double stat_tol = 1e-3;
  /// Multiple of (b/epsilon) M_L added implicitly and subtracted explicitly.
  /// Energy stability of the explicit double-well force needs it to be at
  /// least max W''/2, which is 1 while |phi| <= 1.
  double stabilization = 1.0;
  int max_steps = 100000;
  /// Consecutive rejected steps (each halving tau) before the run aborts.
  int max_rejections = 8;

  /// Throws ParameterError on invalid values.
  void validate() const;
};

struct PhaseState {
  Vector u;
  Vector phi;
  double t = 0.0;
  /// Multipliers of the phi mean and u mean rows in the step taken from this
  /// state (the explicit force is evaluated here).
  double lambda_phi = 0.0;
  double lambda_u = 0.0;
};

struct Potentials {
  double W = 0.0;
  double dW = 0.0;
  double f = 0.0;
  double df = 0.0;
};

/// Double well W = (phi^2 - 1)^2 / 4 and the shifted f = W + eps kappa Lambda^2 phi^2 / (2 b).
Potentials potentials(double phi, const PhaseFieldParams& params, double kappa);

struct PhaseEnergy {
  double bending = 0.0;   // 1/2 u^T A u
  double coupling = 0.0;  // kappa Lambda (-phi^T S u + 2/R^2 phi^T M u)
  double gradient = 0.0;  // b eps/2 phi^T S phi
  double bulk = 0.0;      // b/eps sum_k m_k f(phi_k)
  double total = 0.0;
};

PhaseEnergy energy_E(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params);

/// Euclidean gradient of energy_E with respect to the nodal values, stacked
/// as [d/dphi; d/du].
Vector energy_gradient(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params);

struct Multipliers {
  double lambda_phi = 0.0;
  double lambda_u = 0.0;
};

/// lambda_phi = -(b/eps) mean(f'(phi)) with the lumped mass and
/// lambda_u = -2 kappa Lambda alpha / R^2.
Multipliers multipliers(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params);

struct ConstraintResiduals {
  double phi_mean = 0.0;  // |mean(phi) - alpha|
  double u_mean = 0.0;    // |int u| / area
  double u_nu = 0.0;      // max_i |int u nu_i| / area

  double max() const { return std::max({phi_mean, u_mean, u_nu}); }
};

ConstraintResiduals constraint_residuals(const PhaseState& state, const QuadraticForm& form,
                                         const PhaseFieldParams& params);

/// Mass-orthogonal projection of u onto U_nu and shift of phi to mean alpha.
PhaseState project_constraints(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params);

/// phi = alpha + uniform noise of the given amplitude, u = 0, then projected.
PhaseState noisy_initial_state(const QuadraticForm& form, const PhaseFieldParams& params, std::uint64_t seed,
                               double amplitude = 0.01);

struct StepResult {
  PhaseState state;
  /// Multipliers of the rows [phi mean, u mean, (u, nu_1), (u, nu_2), (u, nu_3)].
  Vector multipliers;
  /// max(|phi_t|, |u_t|) at the starting state, from the flow equations.
  double velocity = 0.0;
  bool accepted = false;
  double energy_before = 0.0;
  double energy_after = 0.0;
  PhaseEnergy energy;  // breakdown at the new state
  std::string diagnostic;
};

/// One linearly implicit step of the conserved gradient flow. All linear terms
/// are implicit in a single coupled solve for (phi, u); the double-well force
/// is explicit. The mean of phi, the mean of u and the three (u, nu_i)
/// moments are enforced by multiplier rows. The coupled matrix is factorized
/// once per time step size.
class FlowStepper {
 public:
  FlowStepper(const QuadraticForm& form, const PhaseFieldParams& params);

  /// Rejects (accepted = false) when the energy grows by more than 1e-8 |E|.
  /// The energy of `state` is recomputed unless supplied.
  StepResult step(const PhaseState& state, std::optional<double> energy_before = std::nullopt) const;

  /// max(|phi_t|, |u_t|) given by the flow equations at `state` with the
  /// supplied row multipliers.
  double velocity(const PhaseState& state, const Vector& multipliers) const;

  /// Residual of the step equations for the pair (previous, next) without the
  /// multiplier rows. With next == previous this is the energy gradient.
  Vector residual(const PhaseState& previous, const PhaseState& next) const;

  double tau() const { return params_.tau; }

 private:
  Vector rhs(const PhaseState& state) const;

  const QuadraticForm* form_;
  PhaseFieldParams params_;
  SparseMatrix system_;
  SparseMatrix coupling_;
  SparseMatrix rows_;
  Vector targets_;
  SaddleSolver solver_;
};

inline StepResult flow_step(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params) {
  return FlowStepper(form, params).step(state);
}

struct FlowRecord {
  int step = 0;
  double t = 0.0;
  double tau = 0.0;
  PhaseEnergy energy;
  ConstraintResiduals residuals;
  double velocity = 0.0;  // max(|phi_t|, |u_t|)
  double lambda_phi = 0.0;
  double lambda_u = 0.0;
};

enum class FlowStatus { Stationary, TimeLimit, StepLimit, Aborted };

std::string to_string(FlowStatus status);

struct FlowReport {
  std::vector<FlowRecord> history;  // one row per visited state
  FlowStatus status = FlowStatus::TimeLimit;
  int rejections = 0;
  bool energy_monotone = true;
  double max_constraint_residual = 0.0;
  std::vector<std::string> warnings;
  std::string message;
};

/// Called after every accepted step (and once for the initial state).
using FlowObserver = std::function<void(int step, const PhaseState&)>;

/// Steps until stationarity, t_end or max_steps. An initial state violating the
/// constraints is projected and a warning recorded. A rejected step halves tau;
/// max_rejections consecutive rejections abort the run. The returned state
/// carries the multipliers of the step probed from it.
PhaseState run_flow(const PhaseState& initial, const QuadraticForm& form, const PhaseFieldParams& params,
                    FlowReport& report, const FlowObserver& observer = {});

/// M-weighted correlation of u and phi - alpha.
double phase_correlation(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params);

/// CSV log of a flow report; header names columns and units.
void write_flow_csv(const std::string& path, const FlowReport& report);

}  // namespace memfem
