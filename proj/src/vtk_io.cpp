#include "memfem/vtk_io.hpp"

#include "memfem/error.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace memfem {

void write_vtk(const std::filesystem::path& path, const TriangleMesh& mesh,
               const std::vector<NamedField>& fields, const std::string& title) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET POLYDATA\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (int i = 0; i < mesh.num_vertices(); ++i)
    out << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  out << "POLYGONS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << "3 " << mesh.triangles(t, 0) << ' ' << mesh.triangles(t, 1) << ' ' << mesh.triangles(t, 2)
        << '\n';
  if (!fields.empty()) {
    out << "POINT_DATA " << mesh.num_vertices() << '\n';
    for (const auto& [name, values] : fields) {
      if (values.size() != mesh.num_vertices())
        throw ParameterError("field '" + name + "' has wrong length for VTK output");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (Eigen::Index i = 0; i < values.size(); ++i) out << values[i] << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw Error("malformed VTK file " + path.string() + ": " + why);
}

}  // namespace

VtkSurface read_vtk(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("# vtk DataFile", 0) != 0) malformed(path, "missing header");
  std::getline(in, line);  // title
  std::getline(in, line);
  if (line.rfind("ASCII", 0) != 0) malformed(path, "only ASCII files are supported");

  VtkSurface result;
  TriangleMesh& mesh = result.mesh;
  std::vector<int> cell_types;
  std::vector<std::array<int, 3>> cells;
  std::string token;
  int point_data = -1;
  while (in >> token) {
    if (token == "DATASET") {
      in >> token;
      if (token != "POLYDATA" && token != "UNSTRUCTURED_GRID") malformed(path, "unsupported dataset " + token);
    } else if (token == "POINTS") {
      int n = 0;
      in >> n >> token;
      mesh.vertices.resize(n, 3);
      for (int i = 0; i < n; ++i) in >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2);
    } else if (token == "POLYGONS" || token == "CELLS") {
      int n = 0;
      int total = 0;
      in >> n >> total;
      cells.resize(n);
      for (int c = 0; c < n; ++c) {
        int k = 0;
        in >> k;
        if (k != 3) malformed(path, "only triangle cells are supported");
        in >> cells[c][0] >> cells[c][1] >> cells[c][2];
      }
    } else if (token == "CELL_TYPES") {
      int n = 0;
      in >> n;
      cell_types.resize(n);
      for (auto& t : cell_types) in >> t;
    } else if (token == "POINT_DATA") {
      in >> point_data;
    } else if (token == "SCALARS") {
      std::string name;
      std::getline(in, line);
      std::istringstream header(line);
      header >> name;
      in >> token;
      if (token != "LOOKUP_TABLE") malformed(path, "expected LOOKUP_TABLE");
      in >> token;
      Eigen::VectorXd values(point_data);
      for (int i = 0; i < point_data; ++i) in >> values[i];
      result.fields.emplace_back(name, std::move(values));
    } else {
      malformed(path, "unexpected token '" + token + "'");
    }
    if (!in) malformed(path, "truncated near '" + token + "'");
  }
  for (int t : cell_types)
    if (t != 5) malformed(path, "non-triangle cell type " + std::to_string(t));
  mesh.triangles.resize(static_cast<Eigen::Index>(cells.size()), 3);
  for (std::size_t c = 0; c < cells.size(); ++c)
    mesh.triangles.row(static_cast<Eigen::Index>(c)) << cells[c][0], cells[c][1], cells[c][2];
  return result;
}

}  // namespace memfem
