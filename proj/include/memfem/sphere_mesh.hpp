#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace memfem {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Closed, outward-oriented triangulated surface.
///
/// `radius_hint` is set when the vertices sample the sphere of that radius;
/// perturbed or imported meshes leave it empty.
struct TriangleMesh {
  Points vertices;
  Triangles triangles;
  std::optional<double> radius_hint;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.rows()); }

  Eigen::Vector3d vertex(int i) const { return vertices.row(i).transpose(); }
};

struct MeshStats {
  int num_vertices = 0;
  int num_triangles = 0;
  int num_edges = 0;
  double h_max = 0.0;
  double total_area = 0.0;
  double enclosed_volume = 0.0;

  int euler_characteristic() const { return num_vertices - num_edges + num_triangles; }
};

inline constexpr int kMaxRefinementLevel = 8;

/// Icosahedron projected to radius R, refined `level` times by 1:4 splitting
/// with every new vertex reprojected onto the sphere. 10*4^level + 2 vertices.
TriangleMesh build_icosphere(double R, int level);

/// Refined 2*`sides`-face bipyramid (poles on the z axis, one equatorial
/// vertex on the +x axis). The result has exact `sides`-fold rotational
/// symmetry about z and mirror symmetry in z = 0, which the icosphere lacks
/// for sides = 10.
TriangleMesh build_bipyramid_sphere(double R, int sides, int level);

/// Throws TopologyError unless every undirected edge is shared by exactly two
/// triangles with opposite orientation, and GeometryError on zero-area
/// triangles.
void check_closed_mesh(const TriangleMesh& mesh);

MeshStats mesh_stats(const TriangleMesh& mesh);

/// FNV-1a hash of the raw vertex and connectivity arrays; fingerprints the
/// mesh in run manifests.
std::uint64_t mesh_checksum(const TriangleMesh& mesh);

/// Copy of `mesh` with vertices transformed by x -> rotation * x + shift.
TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation,
                         const Eigen::Vector3d& shift);

/// Index map i -> j with rotation * x_i = x_j (within `tolerance` times the
/// mesh scale). Throws GeometryError if the vertex set is not invariant.
std::vector<int> vertex_permutation(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation,
                                    double tolerance = 1e-9);

}  // namespace memfem
