#pragma once

#include "memfem/sphere_mesh.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace memfem {

/// Named vertex field written as POINT_DATA.
using NamedField = std::pair<std::string, Eigen::VectorXd>;

/// Legacy ASCII VTK, POLYDATA with triangle polygons. Coordinates and values
/// are printed with 17 significant digits so a write/read cycle is lossless.
void write_vtk(const std::filesystem::path& path, const TriangleMesh& mesh,
               const std::vector<NamedField>& fields = {}, const std::string& title = "memfem");

struct VtkSurface {
  TriangleMesh mesh;
  std::vector<NamedField> fields;
};

/// Reads POLYDATA (POLYGONS) or UNSTRUCTURED_GRID (cell type 5) triangle
/// surfaces with optional scalar POINT_DATA. The returned mesh has no radius
/// hint.
VtkSurface read_vtk(const std::filesystem::path& path);

}  // namespace memfem
