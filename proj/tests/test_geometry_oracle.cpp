#include "memfem/error.hpp"
#include "memfem/geometry_oracle.hpp"
#include "memfem/quadratic_model.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <numbers>

using namespace memfem;

namespace {

constexpr double pi = std::numbers::pi;

double max_radius_deviation(const TriangleMesh& m, double radius) {
  double worst = 0.0;
  for (int i = 0; i < m.num_vertices(); ++i) worst = std::max(worst, std::abs(m.vertex(i).norm() - radius));
  return worst;
}

Vector mean_free(const QuadraticForm& form, Vector u) {
  u.array() -= (form.constraints.row(0) * u)(0) / form.ops.area();
  return u;
}

}  // namespace

TEST_CASE("perturb") {
  const TriangleMesh m = build_icosphere(1.0, 3);
  const int n = m.num_vertices();

  const PerturbedSurface same = perturb(m, Vector::Random(n), 0.0);
  CHECK(same.realized.vertices == m.vertices);
  CHECK(same.realized.triangles == m.triangles);

  const PerturbedSurface offset = perturb(m, Vector::Ones(n), 0.1);
  CHECK(offset.realized.num_vertices() == n);
  CHECK(max_radius_deviation(offset.realized, 1.1) <= 1e-12);

  // u = z: each vertex moves by rho z (x, y, z)
  const PerturbedSurface shifted = perturb(m, m.vertices.col(2), 0.05);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = m.vertex(i);
    CHECK((shifted.realized.vertex(i) - (x + 0.05 * x.z() * x)).norm() <= 1e-14);
  }

  CHECK_THROWS_AS(perturb(m, Vector::Ones(n), 1.0), GeometryError);
  CHECK_THROWS_AS(perturb(m, Vector::Constant(n, -2.0), 0.6), GeometryError);
  CHECK_NOTHROW(perturb(m, Vector::Constant(n, -2.0), 0.49));
}

TEST_CASE("mean curvature of spheres") {
  SUBCASE("unit sphere") {
    const Vector H = discrete_mean_curvature(build_icosphere(1.0, 5));
    CHECK((H.array() - 2.0).abs().maxCoeff() <= 1e-2);
  }
  SUBCASE("radius 2") {
    const Vector H = discrete_mean_curvature(build_icosphere(2.0, 5));
    CHECK((H.array() - 1.0).abs().maxCoeff() <= 5e-3);
  }
  SUBCASE("uniform offset to radius 1.1") {
    const TriangleMesh m = build_icosphere(1.0, 5);
    const Vector H = discrete_mean_curvature(perturb(m, Vector::Ones(m.num_vertices()), 0.1).realized);
    CHECK((H.array() - 2.0 / 1.1).abs().maxCoeff() <= 1e-2);
  }
  SUBCASE("deviation is second order") {
    std::vector<double> dev;
    for (int level = 2; level <= 5; ++level)
      dev.push_back((discrete_mean_curvature(build_icosphere(1.0, level)).array() - 2.0).abs().maxCoeff());
    for (std::size_t i = 1; i < dev.size(); ++i) CHECK(dev[i - 1] / dev[i] >= 3.0);
  }
}

TEST_CASE("sphere energies") {
  ModelParams p;
  for (double R : {1.0, 2.5}) {
    p.R = R;
    const TriangleMesh m = build_icosphere(R, 5);
    const EnergyBreakdown e = energies(m, p, p.lambda0(), 4.0 * pi * R * R * R / 3.0);
    CHECK(e.willmore == doctest::Approx(8.0 * pi).epsilon(5e-3));
    CHECK(e.willmore >= 8.0 * pi * (1.0 - 5e-3));
    CHECK(e.area == doctest::Approx(4.0 * pi * R * R).epsilon(3e-3));
    CHECK(e.helfrich == doctest::Approx(e.willmore + e.area));
    CHECK(e.lagrangian == doctest::Approx(8.0 * pi + 4.0 * pi * R * R).epsilon(5e-3));
  }
  p.R = 1.0;
  const TriangleMesh m = build_icosphere(1.0, 5);
  const EnergyBreakdown e = energies(m, p, 1.0, 0.0);
  CHECK(e.helfrich == doctest::Approx(12.0 * pi).epsilon(5e-3));
  CHECK(e.lagrangian == doctest::Approx(e.helfrich + e.volume));
}

TEST_CASE("energies are rigid-motion invariant") {
  const TriangleMesh m = build_icosphere(1.0, 3);
  const PerturbedSurface s = perturb(m, m.vertices.col(0).cwiseProduct(m.vertices.col(2)), 0.3);
  const Eigen::Matrix3d Q = (Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, -1).normalized())).toRotationMatrix();
  const TriangleMesh moved = transformed(s.realized, Q, Eigen::Vector3d(3.0, -1.0, 0.5));
  const ModelParams p;
  const EnergyBreakdown a = energies(s.realized, p, 0.0, 0.0);
  const EnergyBreakdown b = energies(moved, p, 0.0, 0.0);
  CHECK(std::abs(a.willmore - b.willmore) <= 1e-12 * a.willmore);
  CHECK(std::abs(a.area - b.area) <= 1e-12 * a.area);
  CHECK(std::abs(a.volume - b.volume) <= 1e-12 * a.volume);
}

TEST_CASE("Taylor consistency") {
  const TriangleMesh m = build_icosphere(1.0, 4);
  const QuadraticForm form = assemble_a(m, ModelParams{});
  const std::vector<double> rho{0.1, 0.05, 0.025, 0.0125};

  SUBCASE("zero field is exact") {
    const TaylorReport r = taylor_consistency(form, m, Vector::Zero(m.num_vertices()), 0.5, rho);
    CHECK(r.status == TaylorStatus::Exact);
    for (const TaylorRow& row : r.rows) CHECK(row.residual == 0.0);
  }
  SUBCASE("translation direction") {
    const TaylorReport r = taylor_consistency(form, m, m.vertices.col(2), 0.0, rho);
    CHECK(std::abs(r.quadratic_lagrangian) <= 1e-1);
    CHECK(r.rows.size() == rho.size());
    CHECK(std::abs(r.rows.back().residual) < std::abs(r.rows.front().residual));
  }
  SUBCASE("degree-2 harmonic") {
    const TriangleMesh fine = build_icosphere(1.0, 5);
    const QuadraticForm f = assemble_a(fine, ModelParams{});
    const TaylorReport r = taylor_consistency(f, fine, mean_free(f, zonal_degree2(fine)), 0.5, rho);
    CHECK(r.status == TaylorStatus::Pass);
    CHECK(r.slope == doctest::Approx(3.0).epsilon(0.1));
    CHECK(std::isnan(r.rows.front().slope_so_far));
    CHECK(r.discretization_floor >= 0.0);
    CHECK(r.roundoff_floor > 0.0);
  }
}

TEST_CASE("first variation vanishes at lambda0") {
  const TriangleMesh m = build_icosphere(1.0, 4);
  const ModelParams p;
  const QuadraticForm form = assemble_a(m, p);
  const Vector u = mean_free(form, zonal_degree2(m) + 0.5 * m.vertices.col(0));
  const double V0 = mesh_stats(m).enclosed_volume;
  const double base = energies(m, p, p.lambda0(), V0).lagrangian;
  std::vector<double> quotient;
  for (double rho : {0.04, 0.02, 0.01}) {
    const double L = energies(perturb(m, u, rho).realized, p, p.lambda0(), V0).lagrangian;
    quotient.push_back(std::abs(L - base) / rho);
  }
  CHECK(quotient[0] / quotient[1] == doctest::Approx(2.0).epsilon(0.1));
  CHECK(quotient[1] / quotient[2] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("Taylor CSV header carries units") {
  const TriangleMesh m = build_icosphere(1.0, 2);
  const QuadraticForm form = assemble_a(m, ModelParams{});
  const TaylorReport r = taylor_consistency(form, m, Vector::Zero(m.num_vertices()), 0.0, {0.1, 0.05});
  const std::string path = "taylor_test.csv";
  write_taylor_csv(path, r);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f);
  char line[256] = {};
  REQUIRE(std::fgets(line, sizeof line, f));
  std::fclose(f);
  std::remove(path.c_str());
  const std::string header = line;
  CHECK(header.find("rho") != std::string::npos);
  CHECK(header.find("residual") != std::string::npos);
  CHECK(header.find("slope") != std::string::npos);
}
