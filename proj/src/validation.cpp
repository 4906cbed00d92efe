#include "memfem/validation.hpp"

#include "memfem/error.hpp"
#include "memfem/geometry_oracle.hpp"
#include "memfem/linear_solvers.hpp"
#include "memfem/point_constraints.hpp"
#include "memfem/sphere_mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace memfem {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::ostringstream numbers_stream() {
  std::ostringstream s;
  s << std::setprecision(4);
  return s;
}

struct SphereErrors {
  double area = 0.0;
  double volume = 0.0;
};

SphereErrors sphere_errors(int level) {
  const MeshStats st = mesh_stats(build_icosphere(1.0, level));
  const double area = 4.0 * std::numbers::pi;
  const double volume = area / 3.0;
  return {std::abs(st.total_area - area) / area, std::abs(st.enclosed_volume - volume) / volume};
}

// sqrt(r^T K^{-1} r) for SPD K
double dual_norm(const Eigen::SimplicialLDLT<SparseMatrix>& K, const Vector& r) {
  return std::sqrt(std::max(0.0, r.dot(K.solve(r))));
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

}  // namespace

CheckResult check_sphere_geometry(int level, double tolerance, double min_ratio) {
  const auto start = Clock::now();
  if (level < 1) throw ParameterError("sphere geometry check needs level >= 1");
  const SphereErrors coarse = sphere_errors(level - 1);
  const SphereErrors fine = sphere_errors(level);
  const double area_ratio = coarse.area / fine.area;
  const double volume_ratio = coarse.volume / fine.volume;

  CheckResult r;
  r.id = 1;
  r.title = "sphere geometry";
  r.passed = fine.area <= tolerance && fine.volume <= tolerance && area_ratio >= min_ratio &&
             volume_ratio >= min_ratio;
  auto s = numbers_stream();
  s << "level " << level << ": area err " << fine.area << ", volume err " << fine.volume << "; reduction from level "
    << level - 1 << ": " << area_ratio << ", " << volume_ratio;
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_spectrum(int level, double tolerance) {
  const auto start = Clock::now();
  const TriangleMesh mesh = build_icosphere(1.0, level);
  const SurfaceOperators ops = make_operators(mesh);
  // one extra value shows the degree-3 cluster has exactly 7 members
  const EigenPairs pairs = lowest_generalized_eigenpairs(ops.stiffness, ops.mass, 17, 1.0);

  double worst = 0.0;
  int index = 0;
  for (int l = 0; l <= 3; ++l) {
    const double exact = l * (l + 1.0);
    for (int k = 0; k < 2 * l + 1; ++k, ++index) {
      const double value = pairs.values[index];
      const double err = l == 0 ? std::abs(value) : std::abs(value - exact) / exact;
      worst = std::max(worst, err);
    }
  }
  const double next = pairs.values[16];

  CheckResult r;
  r.id = 2;
  r.title = "Laplace-Beltrami spectrum";
  r.passed = worst <= tolerance && next > 20.0 * (1.0 - tolerance);
  auto s = numbers_stream();
  s << "level " << level << ": eigenvalues";
  for (int i = 0; i < 16; ++i) s << (i == 1 || i == 4 || i == 9 ? " | " : " ") << pairs.values[i];
  s << "; max rel err " << worst << "; 17th " << next << " (degree 4 is 20)";
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

FormDiagnostics form_diagnostics(int level, const ModelParams& params) {
  const TriangleMesh mesh = build_icosphere(params.R, level);
  const QuadraticForm form = assemble_a(mesh, params);
  const int n = form.size();

  FormDiagnostics d;
  d.level = level;
  const Vector one = Vector::Ones(n);
  const double expected = -8.0 * std::numbers::pi * params.sigma;
  d.a11_error = std::abs(form.evaluate(one, one) - expected) / std::abs(expected);

  Eigen::SimplicialLDLT<SparseMatrix> mass(form.ops.mass);
  const SparseMatrix& S = form.ops.stiffness;
  const SparseMatrix Linv = form.ops.lumped.cwiseInverse().asDiagonal() * S;
  const SparseMatrix h2 = SparseMatrix(form.ops.mass + S) + SparseMatrix(Linv.transpose() * form.ops.mass * Linv);
  Eigen::SimplicialLDLT<SparseMatrix> h2_norm(h2);
  if (mass.info() != Eigen::Success || h2_norm.info() != Eigen::Success)
    throw SolverError("form diagnostics: factorization failed");

  // power iteration on M^{-1} A; the top of the spectrum is positive and isolated enough
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Vector x(n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
  double lambda_max = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Vector y = mass.solve(form.A * x);
    lambda_max = x.dot(form.A * x) / x.dot(form.ops.mass * x);
    x = y / std::sqrt(y.dot(form.ops.mass * y));
  }

  for (int i = 1; i <= 3; ++i) {
    const Vector nu = form.kernel.col(i);
    const Vector r = form.A * nu;
    const double nu_norm = std::sqrt(nu.dot(form.ops.mass * nu));
    d.nu_backward_error = std::max(d.nu_backward_error, dual_norm(mass, r) / (lambda_max * nu_norm));
    d.nu_h2_dual = std::max(d.nu_h2_dual, dual_norm(h2_norm, r));
  }

  // A + 4M is SPD (the constants sit at -2 sigma / R^2), so the inner solves use Cholesky
  const double shift = 4.0 * std::max(1.0, params.sigma) / (params.R * params.R);
  const EigenPairs low = lowest_generalized_eigenpairs(form.A, form.ops.mass, 1, shift, form.constraints);
  d.min_eigenvalue = low.values[0];
  return d;
}

CheckResult check_quadratic_form(int first, int last, double a11_tolerance, double nu_tolerance) {
  const auto start = Clock::now();
  if (first > last) throw ParameterError("quadratic form check: empty level range");
  std::vector<FormDiagnostics> rows;
  for (int level = first; level <= last; ++level) rows.push_back(form_diagnostics(level));

  std::vector<double> backward;
  std::vector<double> h2;
  double lo = rows.front().min_eigenvalue;
  double hi = lo;
  for (const auto& d : rows) {
    backward.push_back(d.nu_backward_error);
    h2.push_back(d.nu_h2_dual);
    lo = std::min(lo, d.min_eigenvalue);
    hi = std::max(hi, d.min_eigenvalue);
  }
  const FormDiagnostics& fine = rows.back();
  const double spread = (hi - lo) / hi;

  CheckResult r;
  r.id = 3;
  r.title = "quadratic form structure";
  r.passed = fine.a11_error <= a11_tolerance && fine.nu_backward_error <= nu_tolerance &&
             strictly_decreasing(backward) && strictly_decreasing(h2) && lo > 0.0 && spread <= 0.05;
  auto s = numbers_stream();
  s << "a(1,1) rel err " << fine.a11_error << " at level " << last << ";";
  for (const auto& d : rows)
    s << " L" << d.level << ": |A nu|/scale " << d.nu_backward_error << ", H2-dual " << d.nu_h2_dual << ", min eig "
      << d.min_eigenvalue << ";";
  s << " eig spread " << spread;
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_taylor(int level, double required_slope) {
  const auto start = Clock::now();
  const TriangleMesh mesh = build_icosphere(1.0, level);
  const QuadraticForm form = assemble_a(mesh, ModelParams{});
  const TaylorReport rep =
      taylor_consistency(form, mesh, zonal_degree2(mesh), 0.5, {0.1, 0.05, 0.025, 0.0125}, required_slope);

  CheckResult r;
  r.id = 4;
  r.title = "Taylor consistency";
  r.passed = rep.status == TaylorStatus::Pass || rep.status == TaylorStatus::Exact;
  auto s = numbers_stream();
  s << "level " << level << ": slope " << rep.slope << " (need " << required_slope << "), residuals";
  for (const auto& row : rep.rows) s << " " << row.residual;
  s << "; discretization floor " << rep.discretization_floor << ", roundoff floor " << rep.roundoff_floor
    << ", status " << to_string(rep.status);
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_penalty_convergence(int level, int threads) {
  const auto start = Clock::now();
  const TriangleMesh mesh = build_icosphere(1.0, level);
  const QuadraticForm form = assemble_a(mesh, ModelParams{});
  const ConstraintSet cs = materialize(icosahedron_particle(1.0), 1.0);
  const ConvergenceStudy study = convergence_study(form, cs, {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}, threads);

  CheckResult r;
  r.id = 5;
  r.title = "penalty convergence";
  r.passed = study.monotone && study.rate_in_range(0.45, 1.1);
  auto s = numbers_stream();
  s << "level " << level << ": H2 errors";
  for (const auto& row : study.rows) s << " " << row.h2_error;
  s << "; rate " << study.rate << ", monotone " << (study.monotone ? "yes" : "no");
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_hard_constraints(int level) {
  const auto start = Clock::now();
  struct Case {
    std::string name;
    TriangleMesh mesh;
    ConstraintSet cs;
    std::vector<Eigen::Matrix3d> symmetries;
  };

  std::vector<Case> cases;
  {
    TriangleMesh mesh = build_icosphere(1.0, level);
    const Eigen::Vector3d vertex_axis = mesh.vertex(0).normalized();
    const Eigen::Matrix3d five = Eigen::AngleAxisd(2.0 * std::numbers::pi / 5.0, vertex_axis).toRotationMatrix();
    Eigen::Matrix3d cycle;
    cycle << 0, 0, 1, 1, 0, 0, 0, 1, 0;  // 3-fold about (1, 1, 1)
    cases.push_back({"icosahedral", mesh, materialize(icosahedron_particle(1.0), 1.0), {five, cycle}});
  }
  {
    TriangleMesh mesh = build_bipyramid_sphere(1.0, 10, level);
    const Eigen::Matrix3d turn = Eigen::AngleAxisd(2.0 * std::numbers::pi / 10.0, Eigen::Vector3d::UnitZ())
                                     .toRotationMatrix();
    const Eigen::Matrix3d mirror = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
    cases.push_back({"ten-fold equator", mesh, materialize(equator_ring(1.0, 10), 1.0), {turn, mirror}});
  }

  double interp = 0.0;
  double zero = 0.0;
  double symmetry = 0.0;
  auto s = numbers_stream();
  s << "level " << level << ":";
  for (const auto& c : cases) {
    const QuadraticForm form = assemble_a(c.mesh, ModelParams{});
    const ConstraintSolution sol = solve_hard(form, c.cs);
    const double ci = sol.point_residuals.cwiseAbs().maxCoeff();

    ConstraintSet zero_cs = c.cs;
    std::fill(zero_cs.targets.begin(), zero_cs.targets.end(), 0.0);
    const double cz = solve_hard(form, zero_cs).u.norm();

    double cs_sym = 0.0;
    for (const auto& Q : c.symmetries) cs_sym = std::max(cs_sym, symmetry_residual(sol.u, vertex_permutation(c.mesh, Q)));

    interp = std::max(interp, ci);
    zero = std::max(zero, cz);
    symmetry = std::max(symmetry, cs_sym);
    s << " " << c.name << " |u(p)-Z| " << ci << ", zero data |u| " << cz << ", symmetry " << cs_sym << ";";
  }

  CheckResult r;
  r.id = 6;
  r.title = "hard constraints";
  r.passed = interp <= 1e-9 && zero <= 1e-10 && symmetry <= 1e-8;
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

std::vector<SweepRun> lambda_sweep(const QuadraticForm& form, const SweepSettings& settings) {
  settings.params.validate();
  auto run = [&](double Lambda) {
    const auto start = Clock::now();
    PhaseFieldParams p = settings.params;
    p.Lambda = Lambda;
    SweepRun out;
    out.Lambda = Lambda;
    const PhaseState initial = noisy_initial_state(form, p, settings.seed, settings.noise);
    out.final_state = run_flow(initial, form, p, out.report);
    out.correlation = phase_correlation(out.final_state, form, p);
    out.seconds = seconds_since(start);
    return out;
  };

  std::vector<SweepRun> runs(settings.lambdas.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, settings.threads));
  for (std::size_t first = 0; first < runs.size(); first += workers) {
    std::vector<std::future<SweepRun>> jobs;
    const std::size_t stop = std::min(runs.size(), first + workers);
    for (std::size_t i = first; i < stop; ++i)
      jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run, settings.lambdas[i]));
    for (std::size_t i = first; i < stop; ++i) runs[i] = jobs[i - first].get();
  }
  return runs;
}

CheckResult check_flow_sweep(const std::vector<SweepRun>& runs, const SweepSettings& settings) {
  CheckResult r;
  r.id = 7;
  r.title = "phase-field flow sweep";
  bool stationary = true;
  bool monotone = true;
  double residual = 0.0;
  double zero_u = -1.0;
  double corr_minus = 0.0;
  double corr_plus = 0.0;
  auto s = numbers_stream();
  s << "level " << settings.level << ", eps " << settings.params.epsilon << ":";
  for (const auto& run : runs) {
    stationary = stationary && run.report.status == FlowStatus::Stationary;
    monotone = monotone && run.report.energy_monotone;
    residual = std::max(residual, run.report.max_constraint_residual);
    if (run.Lambda == 0.0) zero_u = run.final_state.u.cwiseAbs().maxCoeff();
    if (run.Lambda == -5.0) corr_minus = run.correlation;
    if (run.Lambda == 5.0) corr_plus = run.correlation;
    r.seconds += run.seconds;
    s << " L=" << run.Lambda << " " << to_string(run.report.status) << " after "
      << static_cast<int>(run.report.history.size()) - 1 << " steps, corr " << run.correlation << ";";
  }
  const bool flips = corr_minus * corr_plus < 0.0;
  s << " monotone " << (monotone ? "yes" : "no") << ", max constraint residual " << residual;
  if (zero_u >= 0.0) s << ", max|u| at L=0 " << zero_u;
  r.passed = !runs.empty() && stationary && monotone && residual <= 1e-10 && flips && zero_u >= 0.0 &&
             zero_u <= 1e-9;
  r.detail = s.str();
  return r;
}

CheckResult check_multipliers(const std::vector<SweepRun>& runs, const QuadraticForm& form,
                              const SweepSettings& settings) {
  const auto start = Clock::now();
  double phi_err = 0.0;
  double u_err = 0.0;
  bool converged = true;
  for (const auto& run : runs) {
    PhaseFieldParams p = settings.params;
    p.Lambda = run.Lambda;
    const Multipliers closed = multipliers(run.final_state, form, p);
    phi_err = std::max(phi_err, std::abs(run.final_state.lambda_phi - closed.lambda_phi));
    u_err = std::max(u_err, std::abs(run.final_state.lambda_u - closed.lambda_u) / std::max(1.0, std::abs(closed.lambda_u)));
    converged = converged && run.report.status == FlowStatus::Stationary;
  }
  const double scale = settings.params.b / settings.params.epsilon;

  CheckResult r;
  r.id = 9;
  r.title = "multiplier diagnostics";
  // "exactly" for lambda_u: equal up to the rounding of the linear solve
  r.passed = !runs.empty() && converged && phi_err <= 1e-8 * scale && u_err <= 1e-12;
  auto s = numbers_stream();
  s << "max |lambda_phi - closed form| / (b/eps) " << phi_err / scale << ", max rel |lambda_u - closed form| "
    << u_err;
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

CheckResult check_gradient(int level, double tolerance) {
  const auto start = Clock::now();
  const TriangleMesh mesh = build_icosphere(1.0, level);
  const QuadraticForm form = assemble_a(mesh, ModelParams{});
  PhaseFieldParams p;
  p.Lambda = 5.0;
  p.tau = 1e-3;

  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  PhaseState state = noisy_initial_state(form, p, 5, 0.5);
  state.u = Vector::NullaryExpr(form.size(), [&] { return 0.1 * normal(rng); });

  const FlowStepper stepper(form, p);
  const Vector grad = stepper.residual(state, state);
  const int n = form.size();
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Vector d = Vector::NullaryExpr(2 * n, [&] { return normal(rng); });
    d /= d.norm();
    PhaseState plus = state;
    PhaseState minus = state;
    plus.phi += h * d.head(n);
    plus.u += h * d.tail(n);
    minus.phi -= h * d.head(n);
    minus.u -= h * d.tail(n);
    const double fd = (energy_E(plus, form, p).total - energy_E(minus, form, p).total) / (2.0 * h);
    const double exact = grad.dot(d);
    worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
  }

  CheckResult r;
  r.id = 8;
  r.title = "gradient check";
  r.passed = worst <= tolerance;
  auto s = numbers_stream();
  s << "level " << level << ", 10 directions: max rel err " << worst;
  r.detail = s.str();
  r.seconds = seconds_since(start);
  return r;
}

std::string format_check(const CheckResult& result) {
  std::ostringstream s;
  s << (result.passed ? "PASS" : "FAIL") << " criterion " << result.id << " (" << result.title << ") "
    << std::fixed << std::setprecision(2) << result.seconds << " s: " << result.detail;
  return s.str();
}

}  // namespace memfem
