#include "memfem/phase_field.hpp"

#include "memfem/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

namespace memfem {

void PhaseFieldParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive");
  };
  positive(epsilon, "epsilon");
  positive(b, "b");
  positive(alpha1, "alpha1");
  positive(alpha2, "alpha2");
  positive(tau, "tau");
  positive(t_end, "t_end");
  positive(stat_tol, "stat_tol");
  if (!std::isfinite(Lambda)) throw ParameterError("Lambda must be finite");
  if (!(std::abs(alpha) < 1.0)) throw ParameterError("alpha must lie in (-1, 1)");
  if (!(stabilization >= 0.0)) throw ParameterError("stabilization must be nonnegative");
  if (max_steps < 1) throw ParameterError("max_steps must be positive");
  if (max_rejections < 0) throw ParameterError("max_rejections must be nonnegative");
}

Potentials potentials(double phi, const PhaseFieldParams& params, double kappa) {
  const double shift = params.epsilon * kappa * params.Lambda * params.Lambda / params.b;
  Potentials p;
  p.W = 0.25 * (phi * phi - 1.0) * (phi * phi - 1.0);
  p.dW = phi * phi * phi - phi;
  p.f = p.W + 0.5 * shift * phi * phi;
  p.df = p.dW + shift * phi;
  return p;
}

namespace {

// -S + (2/R^2) M: the weak form of Delta + 2/R^2 with the lumped reconstruction.
SparseMatrix coupling_matrix(const QuadraticForm& form) {
  const double R = form.params.R;
  return SparseMatrix(-form.ops.stiffness + (2.0 / (R * R)) * form.ops.mass);
}

void check_state(const PhaseState& state, const QuadraticForm& form) {
  if (state.u.size() != form.size() || state.phi.size() != form.size())
    throw ParameterError("phase state does not match the mesh");
}

Vector stacked(const PhaseState& s) {
  Vector z(s.phi.size() + s.u.size());
  z << s.phi, s.u;
  return z;
}

}  // namespace

namespace {

PhaseEnergy energy_with(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params,
                        const SparseMatrix& coupling) {
  check_state(state, form);
  const double kappa = form.params.kappa;
  const Vector& m = form.ops.lumped;
  PhaseEnergy e;
  e.bending = 0.5 * form.evaluate(state.u, state.u);
  e.coupling = kappa * params.Lambda * state.phi.dot(coupling * state.u);
  e.gradient = 0.5 * params.b * params.epsilon * state.phi.dot(form.ops.stiffness * state.phi);
  double bulk = 0.0;
  for (Eigen::Index k = 0; k < m.size(); ++k) bulk += m[k] * potentials(state.phi[k], params, kappa).f;
  e.bulk = params.b / params.epsilon * bulk;
  e.total = e.bending + e.coupling + e.gradient + e.bulk;
  return e;
}

Vector gradient_with(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params,
                     const SparseMatrix& coupling) {
  check_state(state, form);
  const double kappa = form.params.kappa;
  const Vector& m = form.ops.lumped;
  Vector df(m.size());
  for (Eigen::Index k = 0; k < m.size(); ++k) df[k] = potentials(state.phi[k], params, kappa).df;

  Vector g(2 * m.size());
  g.head(m.size()) = kappa * params.Lambda * (coupling * state.u) +
                     params.b * params.epsilon * (form.ops.stiffness * state.phi) +
                     params.b / params.epsilon * m.cwiseProduct(df);
  g.tail(m.size()) = form.A * state.u + kappa * params.Lambda * (coupling * state.phi);
  return g;
}

}  // namespace

PhaseEnergy energy_E(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params) {
  return energy_with(state, form, params, coupling_matrix(form));
}

Vector energy_gradient(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params) {
  return gradient_with(state, form, params, coupling_matrix(form));
}

Multipliers multipliers(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params) {
  check_state(state, form);
  const double kappa = form.params.kappa;
  const Vector& m = form.ops.lumped;
  double mean_df = 0.0;
  for (Eigen::Index k = 0; k < m.size(); ++k) mean_df += m[k] * potentials(state.phi[k], params, kappa).df;
  mean_df /= m.sum();
  const double R = form.params.R;
  return {-params.b / params.epsilon * mean_df, -2.0 * kappa * params.Lambda * params.alpha / (R * R)};
}

ConstraintResiduals constraint_residuals(const PhaseState& state, const QuadraticForm& form,
                                         const PhaseFieldParams& params) {
  check_state(state, form);
  const double area = form.ops.area();
  const Vector cu = form.constraints * state.u;
  ConstraintResiduals r;
  r.phi_mean = std::abs((form.constraints.row(0) * state.phi)(0) / area - params.alpha);
  r.u_mean = std::abs(cu[0]) / area;
  r.u_nu = cu.tail(3).cwiseAbs().maxCoeff() / area;
  return r;
}

PhaseState project_constraints(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params) {
  check_state(state, form);
  PhaseState out = state;
  // M-orthogonal projection of u onto the complement of span{1, nu_i}
  const Eigen::MatrixXd& K = form.kernel;
  const Eigen::MatrixXd C = Eigen::MatrixXd(form.constraints);
  const Eigen::Matrix4d gram = C * K;
  out.u -= K * gram.ldlt().solve(C * state.u);
  const double area = form.ops.area();
  const double mean = (form.constraints.row(0) * state.phi)(0) / area;
  out.phi.array() += params.alpha - mean;
  return out;
}

PhaseState noisy_initial_state(const QuadraticForm& form, const PhaseFieldParams& params, std::uint64_t seed,
                               double amplitude) {
  std::mt19937_64 rng(seed);
  PhaseState s;
  s.u = Vector::Zero(form.size());
  s.phi.resize(form.size());
  // raw engine output keeps the field identical across standard libraries
  for (Eigen::Index k = 0; k < s.phi.size(); ++k) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    s.phi[k] = params.alpha + amplitude * (2.0 * unit - 1.0);
  }
  return project_constraints(s, form, params);
}

namespace {

SparseMatrix flow_matrix(const QuadraticForm& form, const PhaseFieldParams& p) {
  const int n = form.size();
  const double kappa = form.params.kappa;
  const Vector& m = form.ops.lumped;
  const SparseMatrix B = coupling_matrix(form);
  const double phi_diag = p.alpha1 / p.tau + kappa * p.Lambda * p.Lambda + p.stabilization * p.b / p.epsilon;

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(form.ops.stiffness.nonZeros() + form.A.nonZeros() + 2 * B.nonZeros() + 2 * n));
  for (int k = 0; k < n; ++k) {
    entries.emplace_back(k, k, phi_diag * m[k]);
    entries.emplace_back(n + k, n + k, p.alpha2 / p.tau * m[k]);
  }
  auto add = [&entries](const SparseMatrix& X, int r0, int c0, double scale) {
    if (scale == 0.0) return;
    for (int k = 0; k < X.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(X, k); it; ++it)
        entries.emplace_back(r0 + it.row(), c0 + it.col(), scale * it.value());
  };
  add(form.ops.stiffness, 0, 0, p.b * p.epsilon);
  add(form.A, n, n, 1.0);
  add(B, 0, n, kappa * p.Lambda);
  add(B, n, 0, kappa * p.Lambda);
  SparseMatrix K(2 * n, 2 * n);
  K.setFromTriplets(entries.begin(), entries.end());
  K.makeCompressed();
  return K;
}

// [c0 0], [0 c0], [0 c1], [0 c2], [0 c3]
SparseMatrix flow_rows(const QuadraticForm& form) {
  const int n = form.size();
  std::vector<Eigen::Triplet<double>> entries;
  for (int k = 0; k < form.constraints.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(form.constraints, k); it; ++it) {
      if (it.row() == 0) entries.emplace_back(0, it.col(), it.value());
      entries.emplace_back(1 + it.row(), n + it.col(), it.value());
    }
  SparseMatrix rows(5, 2 * n);
  rows.setFromTriplets(entries.begin(), entries.end());
  rows.makeCompressed();
  return rows;
}

}  // namespace

FlowStepper::FlowStepper(const QuadraticForm& form, const PhaseFieldParams& params)
    : form_(&form),
      params_(params),
      system_((params.validate(), flow_matrix(form, params))),
      coupling_(coupling_matrix(form)),
      rows_(flow_rows(form)),
      targets_(Vector::Zero(5)),
      solver_(system_, rows_, SaddleSolver::Method::Symmetric) {
  targets_[0] = params.alpha * form.ops.area();
}

Vector FlowStepper::rhs(const PhaseState& state) const {
  const QuadraticForm& form = *form_;
  const PhaseFieldParams& p = params_;
  const Vector& m = form.ops.lumped;
  const Eigen::Index n = m.size();
  Vector explicit_force(n);
  for (Eigen::Index k = 0; k < n; ++k)
    explicit_force[k] = p.stabilization * state.phi[k] - potentials(state.phi[k], p, form.params.kappa).dW;
  Vector f(2 * n);
  f.head(n) = m.cwiseProduct(p.alpha1 / p.tau * state.phi + p.b / p.epsilon * explicit_force);
  f.tail(n) = p.alpha2 / p.tau * m.cwiseProduct(state.u);
  return f;
}

Vector FlowStepper::residual(const PhaseState& previous, const PhaseState& next) const {
  check_state(previous, *form_);
  check_state(next, *form_);
  return system_ * stacked(next) - rhs(previous);
}

double FlowStepper::velocity(const PhaseState& state, const Vector& multipliers) const {
  const QuadraticForm& form = *form_;
  const Eigen::Index n = form.size();
  const Vector force = gradient_with(state, form, params_, coupling_) + rows_.transpose() * multipliers;
  const Vector& m = form.ops.lumped;
  const double phi_rate = force.head(n).cwiseQuotient(m).cwiseAbs().maxCoeff() / params_.alpha1;
  const double u_rate = force.tail(n).cwiseQuotient(m).cwiseAbs().maxCoeff() / params_.alpha2;
  return std::max(phi_rate, u_rate);
}

StepResult FlowStepper::step(const PhaseState& state, std::optional<double> energy_before) const {
  check_state(state, *form_);
  const Eigen::Index n = form_->size();
  const SaddleSolution sol = solver_.solve(rhs(state), targets_);

  StepResult r;
  r.state.phi = sol.x.head(n);
  r.state.u = sol.x.tail(n);
  r.state.t = state.t + params_.tau;
  r.multipliers = sol.multipliers;
  r.velocity = velocity(state, sol.multipliers);
  r.energy_before = energy_before ? *energy_before : energy_with(state, *form_, params_, coupling_).total;
  r.energy = energy_with(r.state, *form_, params_, coupling_);
  r.energy_after = r.energy.total;
  const double growth = r.energy_after - r.energy_before;
  r.accepted = growth <= 1e-8 * std::abs(r.energy_before);
  if (!r.accepted) {
    std::ostringstream msg;
    msg << std::setprecision(6) << "energy increased by " << growth << " (from " << r.energy_before << ") at t = "
        << r.state.t << " with tau = " << params_.tau << "; halve tau";
    r.diagnostic = msg.str();
  }
  return r;
}

std::string to_string(FlowStatus status) {
  switch (status) {
    case FlowStatus::Stationary: return "stationary";
    case FlowStatus::TimeLimit: return "time_limit";
    case FlowStatus::StepLimit: return "step_limit";
    case FlowStatus::Aborted: return "aborted";
  }
  return "unknown";
}

PhaseState run_flow(const PhaseState& initial, const QuadraticForm& form, const PhaseFieldParams& params,
                    FlowReport& report, const FlowObserver& observer) {
  params.validate();
  check_state(initial, form);
  report = FlowReport{};
  const double h = mesh_stats(form.mesh).h_max;
  if (params.epsilon < 2.0 * h) {
    std::ostringstream msg;
    msg << "epsilon = " << params.epsilon << " does not resolve the mesh (2h = " << 2.0 * h << ")";
    report.warnings.push_back(msg.str());
  }

  PhaseState state = initial;
  if (constraint_residuals(initial, form, params).max() > 1e-10) {
    report.warnings.push_back("initial state violated the constraints and was projected");
    state = project_constraints(initial, form, params);
  }

  auto record = [&](int step, const PhaseState& s, double tau, double velocity, const PhaseEnergy& energy) {
    FlowRecord row;
    row.step = step;
    row.t = s.t;
    row.tau = tau;
    row.energy = energy;
    row.residuals = constraint_residuals(s, form, params);
    row.velocity = velocity;
    row.lambda_phi = s.lambda_phi;
    row.lambda_u = s.lambda_u;
    report.history.push_back(row);
    report.max_constraint_residual = std::max(report.max_constraint_residual, row.residuals.max());
    if (observer) observer(step, s);
  };

  PhaseFieldParams current = params;
  auto stepper = std::make_unique<FlowStepper>(form, current);
  PhaseEnergy energy = energy_E(state, form, params);
  int consecutive_rejections = 0;
  for (int step = 0;; ++step) {
    const StepResult r = stepper->step(state, energy.total);
    // multipliers of a step belong to the state it starts from
    state.lambda_phi = r.multipliers[0];
    state.lambda_u = r.multipliers[1];
    if (!r.accepted) {
      ++report.rejections;
      if (++consecutive_rejections > params.max_rejections) {
        record(step, state, current.tau, r.velocity, energy);
        report.status = FlowStatus::Aborted;
        report.message = "aborted after " + std::to_string(consecutive_rejections) + " consecutive rejections: " +
                         r.diagnostic;
        break;
      }
      current.tau *= 0.5;
      stepper = std::make_unique<FlowStepper>(form, current);
      --step;
      continue;
    }
    consecutive_rejections = 0;
    record(step, state, current.tau, r.velocity, energy);
    if (r.velocity < params.stat_tol) {
      report.status = FlowStatus::Stationary;
      break;
    }
    if (step >= params.max_steps) {
      report.status = FlowStatus::StepLimit;
      break;
    }
    if (r.state.t > params.t_end * (1.0 + 1e-12)) {
      report.status = FlowStatus::TimeLimit;
      break;
    }
    report.energy_monotone =
        report.energy_monotone && r.energy_after <= energy.total + 1e-8 * std::abs(energy.total);
    state = r.state;
    energy = r.energy;
  }
  return state;
}

double phase_correlation(const PhaseState& state, const QuadraticForm& form, const PhaseFieldParams& params) {
  check_state(state, form);
  const Vector dphi = state.phi.array() - params.alpha;
  const Vector& m = form.ops.lumped;
  const double uu = state.u.dot(m.cwiseProduct(state.u));
  const double pp = dphi.dot(m.cwiseProduct(dphi));
  if (uu == 0.0 || pp == 0.0) return 0.0;
  return state.u.dot(m.cwiseProduct(dphi)) / std::sqrt(uu * pp);
}

void write_flow_csv(const std::string& path, const FlowReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << std::setprecision(17);
  out << "step [-],t [time],tau [time],energy [energy],bending [energy],coupling [energy],gradient [energy],"
         "bulk [energy],phi_mean_residual [-],u_mean_residual [length],u_nu_residual [length],"
         "velocity [1/time],lambda_phi [energy/area],lambda_u [energy/area]\n";
  for (const auto& r : report.history)
    out << r.step << ',' << r.t << ',' << r.tau << ',' << r.energy.total << ',' << r.energy.bending << ','
        << r.energy.coupling << ',' << r.energy.gradient << ',' << r.energy.bulk << ',' << r.residuals.phi_mean
        << ',' << r.residuals.u_mean << ',' << r.residuals.u_nu << ',' << r.velocity << ',' << r.lambda_phi
        << ',' << r.lambda_u << '\n';
}

}  // namespace memfem
