#pragma once

#include "memfem/sphere_mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <filesystem>

namespace memfem {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class MassKind { Consistent, Lumped };

/// P1 mass matrix on the flat triangles. Both kinds satisfy 1^T M 1 = area.
SparseMatrix assemble_mass(const TriangleMesh& mesh, MassKind kind = MassKind::Consistent);

/// Diagonal of the row-sum lumped mass matrix.
Vector lumped_mass(const TriangleMesh& mesh);

/// Mixed Voronoi dual areas: circumcentric cells on non-obtuse triangles,
/// area/2 to the obtuse corner and area/4 to the others otherwise. Sums to
/// the surface area.
Vector mixed_voronoi_area(const TriangleMesh& mesh);

/// Cotangent stiffness S_ij = int grad(chi_i) . grad(chi_j) over the
/// polyhedral surface. Throws GeometryError on a degenerate triangle.
SparseMatrix assemble_stiffness(const TriangleMesh& mesh);

/// The three operators every model on a fixed mesh needs.
struct SurfaceOperators {
  SparseMatrix mass;
  SparseMatrix stiffness;
  Vector lumped;

  double area() const { return lumped.sum(); }
  int size() const { return static_cast<int>(lumped.size()); }
};

SurfaceOperators make_operators(const TriangleMesh& mesh);

/// Evaluation of the piecewise-linear interpolant at a point near the surface.
struct PointEvaluation {
  int triangle = -1;
  std::array<int, 3> vertices{};
  Eigen::Vector3d weights = Eigen::Vector3d::Zero();  // barycentric, sum to 1
  Eigen::Vector3d projected = Eigen::Vector3d::Zero();
  double distance = 0.0;

  double evaluate(const Vector& field) const {
    return weights[0] * field[vertices[0]] + weights[1] * field[vertices[1]] +
           weights[2] * field[vertices[2]];
  }
};

/// Closest-point projection of p onto the mesh. `tolerance` is relative to the
/// mesh scale (radius hint, or the bounding radius); p farther away than that
/// raises GeometryError.
PointEvaluation point_functional(const TriangleMesh& mesh, const Eigen::Vector3d& p,
                                 double tolerance = 0.25);

/// Discrete laplacian reconstruction Delta_h u = -M_L^{-1} S u.
Vector discrete_laplacian(const SurfaceOperators& ops, const Vector& u);

/// (|u|_M^2 + |u|_S^2 + |Delta_h u|_M^2)^{1/2}
double discrete_h2_norm(const SurfaceOperators& ops, const Vector& u);

/// max |A - A^T| / max |A|
double asymmetry(const SparseMatrix& A);

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& A);

}  // namespace memfem
