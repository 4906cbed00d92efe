#include "memfem/sphere_mesh.hpp"

#include "memfem/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <array>
#include <cstring>
#include <map>
#include <numbers>
#include <unordered_map>
#include <utility>
#include <vector>

namespace memfem {

namespace {

struct Builder {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;

  TriangleMesh finish(double R) && {
    TriangleMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(vertices.size()), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i) mesh.vertices.row(i) = vertices[i].transpose();
    mesh.triangles.resize(static_cast<Eigen::Index>(triangles.size()), 3);
    for (std::size_t t = 0; t < triangles.size(); ++t)
      mesh.triangles.row(t) << triangles[t][0], triangles[t][1], triangles[t][2];
    mesh.radius_hint = R;
    return mesh;
  }
};

// Base polyhedra are convex and centred at the origin, so a face is outward
// exactly when its normal points away from the origin.
void orient_outward(Builder& b) {
  for (auto& t : b.triangles) {
    const Eigen::Vector3d& a = b.vertices[t[0]];
    const Eigen::Vector3d n = (b.vertices[t[1]] - a).cross(b.vertices[t[2]] - a);
    if (n.dot(a + b.vertices[t[1]] + b.vertices[t[2]]) < 0.0) std::swap(t[1], t[2]);
  }
}

void subdivide(Builder& b, double R) {
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(b.triangles.size() * 2);
  auto mid = [&](int i, int j) {
    const auto lo = static_cast<std::uint64_t>(std::min(i, j));
    const auto hi = static_cast<std::uint64_t>(std::max(i, j));
    const std::uint64_t key = (lo << 32) | hi;
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    const Eigen::Vector3d m = (b.vertices[i] + b.vertices[j]).normalized() * R;
    const int id = static_cast<int>(b.vertices.size());
    b.vertices.push_back(m);
    midpoint.emplace(key, id);
    return id;
  };

  std::vector<std::array<int, 3>> refined;
  refined.reserve(b.triangles.size() * 4);
  for (const auto& t : b.triangles) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    refined.push_back({t[0], ab, ca});
    refined.push_back({t[1], bc, ab});
    refined.push_back({t[2], ca, bc});
    refined.push_back({ab, bc, ca});
  }
  b.triangles = std::move(refined);
}

void check_request(double R, int level) {
  if (!(R > 0.0) || !std::isfinite(R)) throw ParameterError("sphere radius must be positive and finite");
  if (level < 0) throw ParameterError("refinement level must be nonnegative");
  if (level > kMaxRefinementLevel)
    throw SizeLimitError("refinement level " + std::to_string(level) + " exceeds cap " +
                         std::to_string(kMaxRefinementLevel));
}

TriangleMesh refine_to(Builder b, double R, int level) {
  orient_outward(b);
  for (auto& v : b.vertices) v = v.normalized() * R;
  for (int l = 0; l < level; ++l) subdivide(b, R);
  return std::move(b).finish(R);
}

}  // namespace

TriangleMesh build_icosphere(double R, int level) {
  check_request(R, level);
  const double t = std::numbers::phi;
  Builder b;
  b.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  b.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return refine_to(std::move(b), R, level);
}

TriangleMesh build_bipyramid_sphere(double R, int sides, int level) {
  check_request(R, level);
  if (sides < 3) throw ParameterError("bipyramid needs at least 3 sides");
  Builder b;
  for (int k = 0; k < sides; ++k) {
    const double a = 2.0 * std::numbers::pi * k / sides;
    b.vertices.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  const int north = sides;
  const int south = sides + 1;
  b.vertices.emplace_back(0.0, 0.0, 1.0);
  b.vertices.emplace_back(0.0, 0.0, -1.0);
  for (int k = 0; k < sides; ++k) {
    const int next = (k + 1) % sides;
    b.triangles.push_back({k, next, north});
    b.triangles.push_back({next, k, south});
  }
  return refine_to(std::move(b), R, level);
}

void check_closed_mesh(const TriangleMesh& mesh) {
  if (mesh.num_triangles() == 0) throw TopologyError("mesh has no triangles");
  // directed edge -> count; a closed oriented surface uses each directed edge
  // once and its reverse once.
  std::map<std::pair<int, int>, int> directed;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int i = mesh.triangles(t, k);
      const int j = mesh.triangles(t, (k + 1) % 3);
      if (i < 0 || i >= mesh.num_vertices() || j < 0 || j >= mesh.num_vertices())
        throw TopologyError("triangle " + std::to_string(t) + " references a missing vertex");
      if (++directed[{i, j}] > 1)
        throw TopologyError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                            ") used twice with the same orientation");
    }
    const Eigen::Vector3d a = mesh.vertex(mesh.triangles(t, 0));
    const Eigen::Vector3d n =
        (mesh.vertex(mesh.triangles(t, 1)) - a).cross(mesh.vertex(mesh.triangles(t, 2)) - a);
    if (!(n.norm() > 0.0)) throw GeometryError("triangle " + std::to_string(t) + " is degenerate");
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.contains({edge.second, edge.first}))
      throw TopologyError("boundary edge (" + std::to_string(edge.first) + "," +
                          std::to_string(edge.second) + "): mesh is not watertight");
  }
}

MeshStats mesh_stats(const TriangleMesh& mesh) {
  check_closed_mesh(mesh);
  MeshStats s;
  s.num_vertices = mesh.num_vertices();
  s.num_triangles = mesh.num_triangles();
  s.num_edges = 3 * s.num_triangles / 2;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Vector3d a = mesh.vertex(mesh.triangles(t, 0));
    const Eigen::Vector3d b = mesh.vertex(mesh.triangles(t, 1));
    const Eigen::Vector3d c = mesh.vertex(mesh.triangles(t, 2));
    const Eigen::Vector3d n2 = (b - a).cross(c - a);  // 2 * area * unit normal
    s.total_area += 0.5 * n2.norm();
    // (1/3) * (centroid . normal) * area, summed over faces
    s.enclosed_volume += ((a + b + c) / 3.0).dot(n2) / 6.0;
    s.h_max = std::max({s.h_max, (b - a).norm(), (c - b).norm(), (a - c).norm()});
  }
  return s;
}

std::uint64_t mesh_checksum(const TriangleMesh& mesh) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  feed(mesh.vertices.data(), sizeof(double) * static_cast<std::size_t>(mesh.vertices.size()));
  feed(mesh.triangles.data(), sizeof(int) * static_cast<std::size_t>(mesh.triangles.size()));
  return h;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation,
                         const Eigen::Vector3d& shift) {
  TriangleMesh out = mesh;
  for (int i = 0; i < mesh.num_vertices(); ++i)
    out.vertices.row(i) = (rotation * mesh.vertex(i) + shift).transpose();
  if (!shift.isZero(0.0)) out.radius_hint.reset();
  return out;
}

std::vector<int> vertex_permutation(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation, double tolerance) {
  const int n = mesh.num_vertices();
  const double scale = mesh.vertices.rowwise().norm().maxCoeff();
  const double tol = tolerance * scale;
  // bucket vertices on a grid much coarser than the match tolerance and finer
  // than the vertex spacing; candidates are searched in the 27 neighbours
  const double cell = std::max(scale * 1e-3, 10.0 * tol);
  auto key = [cell](const Eigen::Vector3d& x) {
    return std::array<long, 3>{std::lround(std::floor(x[0] / cell)), std::lround(std::floor(x[1] / cell)),
                               std::lround(std::floor(x[2] / cell))};
  };
  std::map<std::array<long, 3>, std::vector<int>> grid;
  for (int i = 0; i < n; ++i) grid[key(mesh.vertex(i))].push_back(i);

  std::vector<int> image(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d y = rotation * mesh.vertex(i);
    const auto k = key(y);
    for (long dx = -1; dx <= 1 && image[i] < 0; ++dx)
      for (long dy = -1; dy <= 1 && image[i] < 0; ++dy)
        for (long dz = -1; dz <= 1 && image[i] < 0; ++dz) {
          auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == grid.end()) continue;
          for (int j : it->second)
            if ((mesh.vertex(j) - y).norm() <= tol) {
              image[i] = j;
              break;
            }
        }
    if (image[i] < 0)
      throw GeometryError("vertex " + std::to_string(i) + " has no image under the given rotation");
  }
  return image;
}

}  // namespace memfem
