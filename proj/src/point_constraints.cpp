#include "memfem/point_constraints.hpp"

#include "memfem/error.hpp"
#include "memfem/linear_solvers.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

namespace memfem {

Eigen::Matrix3d RigidPose::rotation() const {
  for (int k = 0; k < 3; ++k)
    if (!std::isfinite(q[static_cast<std::size_t>(k)])) throw ParameterError("pose angles must be finite");
  return (Eigen::AngleAxisd(q[0], Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(q[1], Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(q[2], Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

Eigen::Vector3d rigid_transform(const RigidPose& pose, const Eigen::Vector3d& x) {
  return pose.rotation() * x + pose.translation();
}

namespace {

void check_distinct(const std::vector<Eigen::Vector3d>& points, double R) {
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if ((points[i] - points[j]).norm() < 1e-8 * R)
        throw ParameterError("attachment points " + std::to_string(j) + " and " + std::to_string(i) +
                             " coincide");
}

}  // namespace

ConstraintSet materialize(const ParticleSpec& particle, double R) {
  if (!(R > 0.0)) throw ParameterError("sphere radius must be positive");
  if (particle.local_points.empty()) throw ParameterError("particle has no attachment points");
  if (particle.local_points.size() != particle.heights.size())
    throw ParameterError("particle has " + std::to_string(particle.local_points.size()) + " points but " +
                         std::to_string(particle.heights.size()) + " heights");
  check_distinct(particle.local_points, R);

  const Eigen::Matrix3d rot = particle.pose.rotation();
  const Eigen::Vector3d shift = particle.pose.translation();
  ConstraintSet cs;
  for (std::size_t j = 0; j < particle.local_points.size(); ++j) {
    const Eigen::Vector3d y = rot * particle.local_points[j] + shift;
    const double r = y.norm();
    if (!(r > 1e-12 * R))
      throw GeometryError("attachment point " + std::to_string(j) + " is mapped to the origin");
    cs.points.push_back(R * y / r);
  }
  cs.targets = particle.heights;
  check_distinct(cs.points, R);
  return cs;
}

ConstraintSet merge(const std::vector<ConstraintSet>& groups) {
  ConstraintSet out;
  if (!groups.empty()) out.delta = groups.front().delta;
  bool per_point = false;
  for (const auto& g : groups) per_point = per_point || !g.point_deltas.empty();
  for (const auto& g : groups) {
    out.points.insert(out.points.end(), g.points.begin(), g.points.end());
    out.targets.insert(out.targets.end(), g.targets.begin(), g.targets.end());
    if (per_point)
      for (int j = 0; j < g.size(); ++j) out.point_deltas.push_back(g.delta_at(j));
  }
  return out;
}

void validate(const ConstraintSet& cs, double R) {
  if (cs.points.size() != cs.targets.size())
    throw ParameterError("constraint set has " + std::to_string(cs.points.size()) + " points but " +
                         std::to_string(cs.targets.size()) + " targets");
  if (!cs.point_deltas.empty() && cs.point_deltas.size() != cs.points.size())
    throw ParameterError("per-point penalty list has the wrong length");
  for (int j = 0; j < cs.size(); ++j)
    if (!(cs.delta_at(j) > 0.0) || !std::isfinite(cs.delta_at(j)))
      throw ParameterError("penalty parameter delta must be positive (point " + std::to_string(j) + ")");
  for (double z : cs.targets)
    if (!std::isfinite(z)) throw ParameterError("attachment heights must be finite");
  check_distinct(cs.points, R);
}

std::vector<std::string> wellposedness_warnings(const ConstraintSet& cs, double R) {
  std::vector<std::string> warnings;
  if (cs.size() < 4) {
    warnings.push_back("fewer than four attachment points; the hard problem may not be uniquely solvable");
    return warnings;
  }
  Eigen::MatrixXd P(cs.size(), 3);
  for (int j = 0; j < cs.size(); ++j) P.row(j) = cs.points[static_cast<std::size_t>(j)].transpose();
  const Eigen::MatrixXd centered = P.rowwise() - P.colwise().mean();
  const Vector sv = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  if (sv[2] <= 1e-8 * R)
    warnings.push_back("all attachment points are coplanar; solvability of the hard problem is not guaranteed");
  return warnings;
}

SparseMatrix point_rows(const TriangleMesh& mesh, const ConstraintSet& cs) {
  std::vector<Eigen::Triplet<double>> entries;
  for (int j = 0; j < cs.size(); ++j) {
    const PointEvaluation e = point_functional(mesh, cs.points[static_cast<std::size_t>(j)]);
    for (int k = 0; k < 3; ++k)
      if (e.weights[k] != 0.0) entries.emplace_back(j, e.vertices[static_cast<std::size_t>(k)], e.weights[k]);
  }
  SparseMatrix E(cs.size(), mesh.num_vertices());
  E.setFromTriplets(entries.begin(), entries.end());
  E.makeCompressed();
  return E;
}

namespace {

Vector targets_of(const ConstraintSet& cs) {
  return Eigen::Map<const Vector>(cs.targets.data(), static_cast<Eigen::Index>(cs.targets.size()));
}

void fill_report(const QuadraticForm& form, const ConstraintSet& cs, const SparseMatrix& E,
                 ConstraintSolution& s) {
  s.point_values = E * s.u;
  s.point_residuals = s.point_values - targets_of(cs);
  s.bending_energy = 0.5 * form.evaluate(s.u, s.u);
  s.penalty_energy = 0.0;
  for (int j = 0; j < cs.size(); ++j)
    s.penalty_energy += s.point_residuals[j] * s.point_residuals[j] / (2.0 * cs.delta_at(j));
}

}  // namespace

ConstraintSolution solve_penalty(const QuadraticForm& form, const ConstraintSet& cs) {
  validate(cs, form.params.R);
  const SparseMatrix E = point_rows(form.mesh, cs);
  Vector weights(cs.size());
  for (int j = 0; j < cs.size(); ++j) weights[j] = 1.0 / cs.delta_at(j);

  const SparseMatrix penalized = form.A + SparseMatrix(E.transpose() * weights.asDiagonal() * E);
  const Vector f = E.transpose() * weights.cwiseProduct(targets_of(cs));
  const SaddleSolver solver(penalized, form.constraints);
  const SaddleSolution sol = solver.solve(f, Vector::Zero(4));

  ConstraintSolution s;
  s.u = sol.x;
  s.orthogonality_multipliers = sol.multipliers.head<4>();
  s.constraint_residual = sol.constraint_residual;
  fill_report(form, cs, E, s);
  return s;
}

ConstraintSolution solve_hard(const QuadraticForm& form, const ConstraintSet& cs) {
  validate(cs, form.params.R);
  const SparseMatrix E = point_rows(form.mesh, cs);
  const int n = form.size();
  const int L = cs.size();

  std::vector<Eigen::Triplet<double>> entries;
  for (int k = 0; k < form.constraints.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(form.constraints, k); it; ++it)
      entries.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < E.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(E, k); it; ++it) entries.emplace_back(4 + it.row(), it.col(), it.value());
  SparseMatrix B(4 + L, n);
  B.setFromTriplets(entries.begin(), entries.end());

  Vector g = Vector::Zero(4 + L);
  g.tail(L) = targets_of(cs);

  std::optional<SaddleSolver> solver;
  try {
    solver.emplace(form.A, B);
  } catch (const RankDeficiencyError& e) {
    if (e.row() < 4) throw;
    const int j = e.row() - 4;
    throw RankDeficiencyError("attachment point " + std::to_string(j) +
                                  " is dependent on the orthogonality rows and earlier points (" + e.what() + ")",
                              e.row());
  }
  const SaddleSolution sol = solver->solve(Vector::Zero(n), g);

  ConstraintSolution s;
  s.u = sol.x;
  s.orthogonality_multipliers = sol.multipliers.head<4>();
  s.point_multipliers = sol.multipliers.tail(L);
  s.constraint_residual = sol.constraint_residual;
  fill_report(form, cs, E, s);
  return s;
}

ConvergenceStudy convergence_study(const QuadraticForm& form, const ConstraintSet& cs,
                                   const std::vector<double>& deltas, int threads) {
  if (deltas.size() < 4) throw ParameterError("convergence study needs at least four deltas");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw ParameterError("deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw ParameterError("deltas must be strictly decreasing");
  }
  if (!(deltas.front() >= 1e3 * deltas.back()))
    throw ParameterError("convergence study deltas must span at least three decades");
  const ConstraintSolution hard = solve_hard(form, cs);

  auto run = [&](double delta) {
    ConstraintSet c = cs;
    c.delta = delta;
    c.point_deltas.clear();
    const ConstraintSolution soft = solve_penalty(form, c);
    ConvergenceRow row;
    row.delta = delta;
    row.h2_error = discrete_h2_norm(form.ops, hard.u - soft.u);
    row.max_point_residual = soft.point_residuals.cwiseAbs().maxCoeff();
    row.total_energy = soft.bending_energy + soft.penalty_energy;
    return row;
  };

  ConvergenceStudy study;
  study.hard_energy = hard.bending_energy;
  study.rows.resize(deltas.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t start = 0; start < deltas.size(); start += workers) {
    std::vector<std::future<ConvergenceRow>> jobs;
    const std::size_t stop = std::min(deltas.size(), start + workers);
    for (std::size_t i = start; i < stop; ++i)
      jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run, deltas[i]));
    for (std::size_t i = start; i < stop; ++i) study.rows[i] = jobs[i - start].get();
  }

  const auto m = static_cast<Eigen::Index>(deltas.size());
  Eigen::MatrixXd X(m, 2);
  Vector y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(study.rows[static_cast<std::size_t>(i)].delta);
    y[i] = std::log(std::max(study.rows[static_cast<std::size_t>(i)].h2_error, 1e-300));
  }
  study.rate = X.colPivHouseholderQr().solve(y)[1];
  study.monotone = true;
  for (std::size_t i = 1; i < study.rows.size(); ++i)
    study.monotone = study.monotone && study.rows[i].h2_error <= study.rows[i - 1].h2_error;
  return study;
}

double symmetry_residual(const Vector& u, const std::vector<int>& perm) {
  if (static_cast<Eigen::Index>(perm.size()) != u.size()) throw ParameterError("permutation has the wrong length");
  double r = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    r = std::max(r, std::abs(u[perm[i]] - u[static_cast<Eigen::Index>(i)]));
  return r;
}

ParticleSpec icosahedron_particle(double R) {
  // same vertex set, and the same rounding, as the icosphere base mesh
  const TriangleMesh base = build_icosphere(R, 0);
  ParticleSpec p;
  for (int i = 0; i < base.num_vertices(); ++i) p.local_points.push_back(base.vertex(i));
  p.heights.assign(p.local_points.size(), 1.0);
  return p;
}

ParticleSpec equator_ring(double R, int count, double height) {
  if (count < 1) throw ParameterError("ring needs at least one point");
  ParticleSpec p;
  for (int k = 0; k < count; ++k) {
    const double a = 2.0 * std::numbers::pi * k / count;
    p.local_points.emplace_back(R * std::cos(a), R * std::sin(a), 0.0);
  }
  p.heights.assign(static_cast<std::size_t>(count), height);
  return p;
}

std::vector<ParticleSpec> polar_ring_pair(double R, int count, double ring_angle) {
  if (count < 1) throw ParameterError("ring needs at least one point");
  if (!(ring_angle > 0.0 && ring_angle < std::numbers::pi / 2))
    throw ParameterError("ring angle must lie strictly between 0 and pi/2");
  ParticleSpec north;
  ParticleSpec south;
  for (int k = 0; k < count; ++k) {
    const double a = 2.0 * std::numbers::pi * k / count;
    const Eigen::Vector3d x(R * std::sin(ring_angle) * std::cos(a), R * std::sin(ring_angle) * std::sin(a),
                            R * std::cos(ring_angle));
    const double z = k % 2 == 0 ? 1.0 : -1.0;
    north.local_points.push_back(x);
    north.heights.push_back(z);
    south.local_points.emplace_back(x[0], x[1], -x[2]);
    south.heights.push_back(-z);
  }
  return {north, south};
}

}  // namespace memfem
