#pragma once

#include "memfem/fem_core.hpp"
#include "memfem/quadratic_model.hpp"
#include "memfem/sphere_mesh.hpp"

#include <string>
#include <vector>

namespace memfem {

/// Normal graph x + rho u(x) nu(x) over a sphere mesh, nu = x / R.
struct PerturbedSurface {
  TriangleMesh base;
  Vector displacement;
  double rho = 0.0;
  TriangleMesh realized;
};

/// Throws GeometryError unless |rho| max|u| < R.
PerturbedSurface perturb(const TriangleMesh& sphere, const Vector& u, double rho);

/// Area-weighted vertex normals, unit length.
Points vertex_normals(const TriangleMesh& mesh);

/// Nodal mean curvature (sum of principal curvatures, 2/R on a sphere with
/// outward normals) from the weak identity D H_vec = S X with D the mixed
/// Voronoi dual areas, projected on the vertex normal.
Vector discrete_mean_curvature(const TriangleMesh& mesh);

struct EnergyBreakdown {
  double willmore = 0.0;  // sum_i 1/2 H_i^2 |cell_i|
  double area = 0.0;
  double volume = 0.0;
  double helfrich = 0.0;    // kappa * willmore + sigma * area
  double lagrangian = 0.0;  // helfrich + lambda * (volume - V0)
};

EnergyBreakdown energies(const TriangleMesh& mesh, const ModelParams& params, double lambda, double V0);

struct TaylorRow {
  double rho = 0.0;
  double lagrangian = 0.0;
  double residual = 0.0;
  double slope_so_far = 0.0;  // NaN for the first row
};

enum class TaylorStatus { Pass, Fail, Inconclusive, Exact };

std::string to_string(TaylorStatus status);

struct TaylorReport {
  std::vector<TaylorRow> rows;
  double base_lagrangian = 0.0;
  double quadratic_lagrangian = 0.0;  // L(u, mu) from the assembled form
  double slope = 0.0;                 // least-squares log|r| vs log rho
  /// Fit r(rho) ~ e2 rho^2 + e3 rho^3; e2 is the mismatch between the discrete
  /// nonlinear energy and the assembled quadratic form.
  double quadratic_mismatch = 0.0;
  double cubic_coefficient = 0.0;
  /// |e2| rho_min^2: the residual level below which discretization error wins.
  double discretization_floor = 0.0;
  /// Rounding level of the residual, ~ eps * |L(Gamma_0)|.
  double roundoff_floor = 0.0;
  TaylorStatus status = TaylorStatus::Inconclusive;
  double required_slope = 2.7;
};

/// For each rho computes r(rho) = L(Gamma_rho(u), lambda0 + mu rho) - L(Gamma_0, lambda0)
/// - rho^2 L(u, mu), with V0 the enclosed volume of the base mesh. Energies are
/// evaluated only; no derivative of the nonlinear functional is taken.
TaylorReport taylor_consistency(const QuadraticForm& form, const TriangleMesh& sphere, const Vector& u, double mu,
                                const std::vector<double>& rho_list, double required_slope = 2.7);

/// CSV with columns rho, lagrangian, residual, slope_so_far (units in the header).
void write_taylor_csv(const std::string& path, const TaylorReport& report);

}  // namespace memfem
