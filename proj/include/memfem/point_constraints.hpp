#pragma once

#include "memfem/fem_core.hpp"
#include "memfem/quadratic_model.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace memfem {

/// Rotation angles about x, y, z (radians) followed by a translation.
struct RigidPose {
  std::array<double, 6> q{};

  /// Rx(q1) Ry(q2) Rz(q3)
  Eigen::Matrix3d rotation() const;
  Eigen::Vector3d translation() const { return {q[3], q[4], q[5]}; }
};

Eigen::Vector3d rigid_transform(const RigidPose& pose, const Eigen::Vector3d& x);

/// A rigid particle: attachment points in its own frame and their heights.
struct ParticleSpec {
  RigidPose pose;
  std::vector<Eigen::Vector3d> local_points;
  std::vector<double> heights;
};

/// Attachment points on the reference sphere with their normal offsets.
struct ConstraintSet {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> targets;
  double delta = 1e-4;
  /// Optional per-point penalty parameters; empty means `delta` everywhere.
  std::vector<double> point_deltas;

  int size() const { return static_cast<int>(points.size()); }
  double delta_at(int j) const { return point_deltas.empty() ? delta : point_deltas[static_cast<std::size_t>(j)]; }
};

/// Places the particle with its pose and projects radially onto the sphere of
/// radius R. Throws GeometryError for a point mapped to the origin and
/// ParameterError for duplicate points (closer than 1e-8 R).
ConstraintSet materialize(const ParticleSpec& particle, double R);

/// Concatenates independently materialized groups.
ConstraintSet merge(const std::vector<ConstraintSet>& groups);

/// Throws ParameterError on size mismatches, non-positive deltas or
/// duplicate points.
void validate(const ConstraintSet& cs, double R);

/// Human-readable warnings about well-posedness of the hard problem: fewer than
/// four points, or all points coplanar. Empty when the problem is well posed.
std::vector<std::string> wellposedness_warnings(const ConstraintSet& cs, double R);

/// Rows e_j of point evaluation, one per constraint point.
SparseMatrix point_rows(const TriangleMesh& mesh, const ConstraintSet& cs);

struct ConstraintSolution {
  Vector u;
  /// Multipliers of the rows (1, .)_M and (nu_i, .)_M.
  Eigen::Vector4d orthogonality_multipliers = Eigen::Vector4d::Zero();
  /// Reaction at each attachment point (hard problem only).
  Vector point_multipliers;
  Vector point_values;  // u(p_j)
  Vector point_residuals;  // u(p_j) - Z_j
  double bending_energy = 0.0;  // 1/2 a(u, u)
  double penalty_energy = 0.0;  // sum_j (u(p_j) - Z_j)^2 / (2 delta_j)
  double constraint_residual = 0.0;
};

ConstraintSolution solve_penalty(const QuadraticForm& form, const ConstraintSet& cs);

ConstraintSolution solve_hard(const QuadraticForm& form, const ConstraintSet& cs);

struct ConvergenceRow {
  double delta = 0.0;
  double h2_error = 0.0;       // discrete H^2 norm of u - u^delta
  double max_point_residual = 0.0;
  double total_energy = 0.0;   // bending + penalty
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double hard_energy = 0.0;
  double rate = 0.0;  // least-squares slope of log error vs log delta
  bool monotone = false;
  bool rate_in_range(double lo = 0.45, double hi = 1.1) const { return rate >= lo && rate <= hi; }
};

/// Penalty solutions for each delta against the hard solution on the same mesh.
/// At least four strictly decreasing deltas spanning three decades.
/// `threads` > 1 solves the deltas concurrently; results do not depend on it.
ConvergenceStudy convergence_study(const QuadraticForm& form, const ConstraintSet& cs,
                                   const std::vector<double>& deltas, int threads = 1);

/// max_i |u[perm[i]] - u[i]| for a vertex permutation of the mesh.
double symmetry_residual(const Vector& u, const std::vector<int>& perm);

/// 12 vertices of the icosahedron used by the icosphere, unit heights.
ParticleSpec icosahedron_particle(double R);

/// `count` points equally spaced on the equator, first one on the x axis.
ParticleSpec equator_ring(double R, int count, double height = 1.0);

/// Ring of `count` points at polar angle `ring_angle` around the north pole
/// with alternating heights +1, -1. The south group is its mirror image
/// z -> -z with the heights negated.
std::vector<ParticleSpec> polar_ring_pair(double R, int count = 6, double ring_angle = 0.5);

}  // namespace memfem
