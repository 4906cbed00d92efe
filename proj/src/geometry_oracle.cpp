#include "memfem/geometry_oracle.hpp"

#include "memfem/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace memfem {

PerturbedSurface perturb(const TriangleMesh& sphere, const Vector& u, double rho) {
  if (u.size() != sphere.num_vertices()) throw ParameterError("displacement length does not match the mesh");
  const double R = sphere.radius_hint ? *sphere.radius_hint : sphere.vertices.rowwise().norm().mean();
  const double reach = std::abs(rho) * (u.size() > 0 ? u.cwiseAbs().maxCoeff() : 0.0);
  if (!(reach < R))
    throw GeometryError("perturbation |rho| max|u| = " + std::to_string(reach) + " reaches the sphere radius " +
                        std::to_string(R));
  PerturbedSurface s{sphere, u, rho, sphere};
  if (rho == 0.0) return s;
  for (int i = 0; i < sphere.num_vertices(); ++i) {
    const Eigen::Vector3d x = sphere.vertex(i);
    s.realized.vertices.row(i) = (x + rho * u[i] * x / R).transpose();
  }
  s.realized.radius_hint.reset();
  return s;
}

Points vertex_normals(const TriangleMesh& mesh) {
  Points normals = Points::Zero(mesh.num_vertices(), 3);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Vector3d a = mesh.vertex(mesh.triangles(t, 0));
    const Eigen::Vector3d n = (mesh.vertex(mesh.triangles(t, 1)) - a).cross(mesh.vertex(mesh.triangles(t, 2)) - a);
    for (int k = 0; k < 3; ++k) normals.row(mesh.triangles(t, k)) += n.transpose();
  }
  normals.rowwise().normalize();
  return normals;
}

Vector discrete_mean_curvature(const TriangleMesh& mesh) {
  const SparseMatrix S = assemble_stiffness(mesh);
  const Vector cells = mixed_voronoi_area(mesh);
  const Eigen::MatrixXd curvature_normal = S * Eigen::MatrixXd(mesh.vertices);
  const Points normals = vertex_normals(mesh);
  Vector H(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) H[i] = curvature_normal.row(i).dot(normals.row(i)) / cells[i];
  return H;
}

EnergyBreakdown energies(const TriangleMesh& mesh, const ModelParams& params, double lambda, double V0) {
  const MeshStats stats = mesh_stats(mesh);
  const Vector H = discrete_mean_curvature(mesh);
  const Vector cells = mixed_voronoi_area(mesh);
  EnergyBreakdown e;
  e.willmore = 0.5 * H.cwiseAbs2().dot(cells);
  e.area = stats.total_area;
  e.volume = stats.enclosed_volume;
  e.helfrich = params.kappa * e.willmore + params.sigma * e.area;
  e.lagrangian = e.helfrich + lambda * (e.volume - V0);
  return e;
}

std::string to_string(TaylorStatus status) {
  switch (status) {
    case TaylorStatus::Pass: return "pass";
    case TaylorStatus::Fail: return "fail";
    case TaylorStatus::Inconclusive: return "inconclusive";
    case TaylorStatus::Exact: return "exact";
  }
  return "unknown";
}

TaylorReport taylor_consistency(const QuadraticForm& form, const TriangleMesh& sphere, const Vector& u, double mu,
                                const std::vector<double>& rho_list, double required_slope) {
  if (rho_list.size() < 2) throw ParameterError("taylor check needs at least two rho values");
  for (std::size_t i = 1; i < rho_list.size(); ++i)
    if (!(rho_list[i] < rho_list[i - 1]) || !(rho_list[i] > 0.0))
      throw ParameterError("rho list must be positive and strictly decreasing");

  const ModelParams& p = form.params;
  const double V0 = mesh_stats(sphere).enclosed_volume;
  TaylorReport report;
  report.required_slope = required_slope;
  report.base_lagrangian = energies(sphere, p, p.lambda0(), V0).lagrangian;
  report.quadratic_lagrangian = quadratic_lagrangian(u, mu, form);
  report.roundoff_floor = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(report.base_lagrangian);

  for (double rho : rho_list) {
    const PerturbedSurface s = perturb(sphere, u, rho);
    TaylorRow row;
    row.rho = rho;
    row.lagrangian = energies(s.realized, p, p.lambda0() + mu * rho, V0).lagrangian;
    row.residual = row.lagrangian - report.base_lagrangian - rho * rho * report.quadratic_lagrangian;
    row.slope_so_far = std::numeric_limits<double>::quiet_NaN();
    if (!report.rows.empty()) {
      const TaylorRow& prev = report.rows.back();
      row.slope_so_far = std::log(std::abs(prev.residual) / std::abs(row.residual)) / std::log(prev.rho / rho);
    }
    report.rows.push_back(row);
  }

  bool all_zero = true;
  for (const auto& row : report.rows) all_zero = all_zero && row.residual == 0.0;
  if (all_zero) {
    report.status = TaylorStatus::Exact;
    report.slope = std::numeric_limits<double>::infinity();
    return report;
  }

  const auto n = static_cast<Eigen::Index>(report.rows.size());
  Eigen::MatrixXd X(n, 2);
  Vector y(n);
  Eigen::MatrixXd Q(n, 2);
  Vector q(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TaylorRow& row = report.rows[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    X(i, 1) = std::log(row.rho);
    y[i] = std::log(std::max(std::abs(row.residual), std::numeric_limits<double>::min()));
    Q(i, 0) = 1.0;
    Q(i, 1) = row.rho;
    q[i] = row.residual / (row.rho * row.rho);
  }
  report.slope = X.colPivHouseholderQr().solve(y)[1];
  const Vector coeffs = Q.colPivHouseholderQr().solve(q);
  report.quadratic_mismatch = coeffs[0];
  report.cubic_coefficient = coeffs[1];
  const double rho_min = rho_list.back();
  report.discretization_floor = std::abs(report.quadratic_mismatch) * rho_min * rho_min;

  if (report.slope >= required_slope) {
    report.status = TaylorStatus::Pass;
  } else {
    const double cubic_at_min = std::abs(report.cubic_coefficient) * rho_min * rho_min * rho_min;
    const double smallest = std::abs(report.rows.back().residual);
    const bool floor_limited =
        report.discretization_floor >= 0.5 * cubic_at_min || smallest <= 10.0 * report.roundoff_floor;
    report.status = floor_limited ? TaylorStatus::Inconclusive : TaylorStatus::Fail;
  }
  return report;
}

void write_taylor_csv(const std::string& path, const TaylorReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << std::setprecision(17);
  out << "rho [-],lagrangian [energy],residual [energy],slope_so_far [-]\n";
  for (const auto& row : report.rows)
    out << row.rho << ',' << row.lagrangian << ',' << row.residual << ','
        << (std::isnan(row.slope_so_far) ? std::string("") : std::to_string(row.slope_so_far)) << '\n';
}

}  // namespace memfem
