#include "memfem/fem_core.hpp"

#include "memfem/error.hpp"

#include <Eigen/Geometry>
#include <unsupported/Eigen/SparseExtra>

#include <cmath>
#include <limits>
#include <vector>

namespace memfem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct Corners {
  Eigen::Vector3d p[3];
};

Corners corners(const TriangleMesh& mesh, int t) {
  return {{mesh.vertex(mesh.triangles(t, 0)), mesh.vertex(mesh.triangles(t, 1)),
           mesh.vertex(mesh.triangles(t, 2))}};
}

double triangle_area(const Corners& c) { return 0.5 * (c.p[1] - c.p[0]).cross(c.p[2] - c.p[0]).norm(); }

SparseMatrix from_triplets(int n, const Triplets& entries) {
  SparseMatrix A(n, n);
  A.setFromTriplets(entries.begin(), entries.end());
  A.makeCompressed();
  return A;
}

// Closest point on triangle (a, b, c) to p, returned as barycentric weights.
// Region tests follow the Voronoi-region construction of Ericson's
// Real-Time Collision Detection, 5.1.5.
Eigen::Vector3d closest_barycentric(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                    const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return {1, 0, 0};
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return {0, 1, 0};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return {1 - v, v, 0};
  }
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return {0, 0, 1};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return {1 - w, 0, w};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0, 1 - w, w};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {1 - v - w, v, w};
}

}  // namespace

SparseMatrix assemble_mass(const TriangleMesh& mesh, MassKind kind) {
  Triplets entries;
  entries.reserve(static_cast<std::size_t>(mesh.num_triangles()) * (kind == MassKind::Lumped ? 3 : 9));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = triangle_area(corners(mesh, t));
    for (int i = 0; i < 3; ++i) {
      const int vi = mesh.triangles(t, i);
      if (kind == MassKind::Lumped) {
        entries.emplace_back(vi, vi, area / 3.0);
        continue;
      }
      for (int j = 0; j < 3; ++j)
        entries.emplace_back(vi, mesh.triangles(t, j), area / (i == j ? 6.0 : 12.0));
    }
  }
  return from_triplets(mesh.num_vertices(), entries);
}

Vector lumped_mass(const TriangleMesh& mesh) {
  Vector m = Vector::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double third = triangle_area(corners(mesh, t)) / 3.0;
    for (int i = 0; i < 3; ++i) m[mesh.triangles(t, i)] += third;
  }
  return m;
}

Vector mixed_voronoi_area(const TriangleMesh& mesh) {
  Vector cells = Vector::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Corners c = corners(mesh, t);
    const double area = triangle_area(c);
    double cot[3];
    int obtuse = -1;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d a = c.p[(k + 1) % 3] - c.p[k];
      const Eigen::Vector3d b = c.p[(k + 2) % 3] - c.p[k];
      cot[k] = a.dot(b) / a.cross(b).norm();
      if (a.dot(b) < 0.0) obtuse = k;
    }
    for (int k = 0; k < 3; ++k) {
      double share;
      if (obtuse >= 0) {
        share = k == obtuse ? area / 2.0 : area / 4.0;
      } else {
        const int j = (k + 1) % 3;
        const int l = (k + 2) % 3;
        share = ((c.p[j] - c.p[k]).squaredNorm() * cot[l] + (c.p[l] - c.p[k]).squaredNorm() * cot[j]) / 8.0;
      }
      cells[mesh.triangles(t, k)] += share;
    }
  }
  return cells;
}

SparseMatrix assemble_stiffness(const TriangleMesh& mesh) {
  Triplets entries;
  entries.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Corners c = corners(mesh, t);
    const double area = triangle_area(c);
    if (!(area > 0.0)) throw GeometryError("degenerate triangle " + std::to_string(t) + " in stiffness assembly");
    // e[i] is the edge opposite corner i; grad chi_i = n x e[i] / (2 area)
    const Eigen::Vector3d e[3] = {c.p[2] - c.p[1], c.p[0] - c.p[2], c.p[1] - c.p[0]};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        entries.emplace_back(mesh.triangles(t, i), mesh.triangles(t, j), e[i].dot(e[j]) / (4.0 * area));
  }
  return from_triplets(mesh.num_vertices(), entries);
}

SurfaceOperators make_operators(const TriangleMesh& mesh) {
  return {assemble_mass(mesh, MassKind::Consistent), assemble_stiffness(mesh), lumped_mass(mesh)};
}

PointEvaluation point_functional(const TriangleMesh& mesh, const Eigen::Vector3d& p, double tolerance) {
  PointEvaluation best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Corners c = corners(mesh, t);
    const Eigen::Vector3d w = closest_barycentric(p, c.p[0], c.p[1], c.p[2]);
    const Eigen::Vector3d q = w[0] * c.p[0] + w[1] * c.p[1] + w[2] * c.p[2];
    const double d = (q - p).norm();
    if (d < best.distance) {
      best.distance = d;
      best.triangle = t;
      best.vertices = {mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)};
      best.weights = w;
      best.projected = q;
    }
  }
  const double scale = mesh.radius_hint ? *mesh.radius_hint : mesh.vertices.rowwise().norm().maxCoeff();
  if (!(best.distance <= tolerance * scale))
    throw GeometryError("point is " + std::to_string(best.distance) + " from the surface (tolerance " +
                        std::to_string(tolerance * scale) + ")");
  // snap weights that are zero up to rounding so vertex hits give unit rows
  for (int k = 0; k < 3; ++k) {
    if (std::abs(best.weights[k]) < 1e-14) best.weights[k] = 0.0;
    if (std::abs(best.weights[k] - 1.0) < 1e-14) best.weights[k] = 1.0;
  }
  best.weights /= best.weights.sum();
  return best;
}

Vector discrete_laplacian(const SurfaceOperators& ops, const Vector& u) {
  return -(ops.stiffness * u).cwiseQuotient(ops.lumped);
}

double discrete_h2_norm(const SurfaceOperators& ops, const Vector& u) {
  const Vector lap = discrete_laplacian(ops, u);
  return std::sqrt(u.dot(ops.mass * u) + u.dot(ops.stiffness * u) + lap.dot(ops.mass * lap));
}

double asymmetry(const SparseMatrix& A) {
  const SparseMatrix At = A.transpose();
  const SparseMatrix diff = A - At;
  double dmax = 0.0;
  double amax = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) dmax = std::max(dmax, std::abs(it.value()));
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) amax = std::max(amax, std::abs(it.value()));
  return amax > 0.0 ? dmax / amax : 0.0;
}

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& A) {
  if (!Eigen::saveMarket(A, path.string())) throw Error("cannot write " + path.string());
}

}  // namespace memfem
