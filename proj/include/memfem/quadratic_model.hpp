#pragma once

#include "memfem/fem_core.hpp"

namespace memfem {

/// Bending rigidity kappa, surface tension sigma and reference radius R.
struct ModelParams {
  double kappa = 1.0;
  double sigma = 1.0;
  double R = 1.0;

  /// Volume multiplier that makes the sphere a critical point.
  double lambda0() const { return -2.0 * sigma / R; }

  /// Throws ParameterError unless kappa > 0, sigma >= 0, R > 0.
  void validate() const;
};

/// How Delta u is rebuilt from the P1 field inside the biharmonic term.
enum class Reconstruction {
  LumpedMass,      // S M_L^{-1} S, sparse
  ConsistentMass,  // S M^{-1} S, dense; small meshes only
};

/// The assembled quadratic form a(.,.) on a sphere mesh plus the four
/// functionals whose common kernel is U_nu.
struct QuadraticForm {
  TriangleMesh mesh;
  ModelParams params;
  SurfaceOperators ops;
  SparseMatrix A;
  /// 4 x n; row 0 is (1, .)_M, rows 1..3 are (nu_i, .)_M with nu = x / R.
  SparseMatrix constraints;
  /// Columns are the vertex values of 1, nu_1, nu_2, nu_3.
  Eigen::MatrixXd kernel;

  double evaluate(const Vector& u, const Vector& v) const { return u.dot(A * v); }
  int size() const { return ops.size(); }
};

/// Throws ParameterError when the mesh does not sample the sphere of radius
/// params.R.
QuadraticForm assemble_a(const TriangleMesh& mesh, const ModelParams& params,
                         Reconstruction reconstruction = Reconstruction::LumpedMass);

/// c_0 = M 1 and c_i = M nu_i as rows of a 4 x n matrix.
SparseMatrix constraint_rows(const TriangleMesh& mesh, const SparseMatrix& mass);

/// 1/2 u^T A u + mu * c_0(u)
double quadratic_lagrangian(const Vector& u, double mu, const QuadraticForm& form);

/// Continuum value of a(Y, Y) / |Y|^2 for a degree-l spherical harmonic.
double harmonic_rayleigh_quotient(const ModelParams& params, int degree);

/// Real spherical-harmonic-like polynomials used throughout the tests and
/// checks: degree 2 zonal 3 z^2/R^2 - 1, evaluated at the mesh vertices.
Vector zonal_degree2(const TriangleMesh& mesh);

}  // namespace memfem
