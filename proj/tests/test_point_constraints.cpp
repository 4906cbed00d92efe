#include "memfem/error.hpp"
#include "memfem/point_constraints.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

using namespace memfem;

namespace {

constexpr double pi = std::numbers::pi;

struct Fixture {
  TriangleMesh mesh = build_icosphere(1.0, 3);
  QuadraticForm form = assemble_a(mesh, ModelParams{});
};

ConstraintSet points_on_sphere(std::vector<Eigen::Vector3d> points, std::vector<double> targets, double delta = 1e-4) {
  ConstraintSet cs;
  for (auto& p : points) p.normalize();
  cs.points = std::move(points);
  cs.targets = std::move(targets);
  cs.delta = delta;
  return cs;
}

Eigen::Matrix3d five_fold(const TriangleMesh& mesh) {
  return Eigen::AngleAxisd(2.0 * pi / 5.0, mesh.vertex(0).normalized()).toRotationMatrix();
}

}  // namespace

TEST_CASE("rigid transform") {
  const Eigen::Vector3d x(0.3, -0.2, 0.9);
  CHECK((rigid_transform(RigidPose{}, x) - x).norm() == 0.0);

  RigidPose quarter;
  quarter.q = {0.0, 0.0, pi / 2.0, 0.0, 0.0, 0.0};
  CHECK((rigid_transform(quarter, Eigen::Vector3d::UnitX()) - Eigen::Vector3d::UnitY()).norm() <= 1e-15);

  // x first, then y, then z, composed as written
  RigidPose pose;
  pose.q = {0.4, -1.1, 2.3, 0.5, 0.0, -2.0};
  const Eigen::Matrix3d expected = (Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitX()) *
                                    Eigen::AngleAxisd(-1.1, Eigen::Vector3d::UnitY()) *
                                    Eigen::AngleAxisd(2.3, Eigen::Vector3d::UnitZ()))
                                       .toRotationMatrix();
  CHECK((pose.rotation() - expected).norm() <= 1e-14);
  CHECK((rigid_transform(pose, x) - (expected * x + Eigen::Vector3d(0.5, 0.0, -2.0))).norm() <= 1e-14);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    RigidPose q;
    for (double& v : q.q) v = U(rng);
    const Eigen::Vector3d a(U(rng), U(rng), U(rng));
    const Eigen::Vector3d b(U(rng), U(rng), U(rng));
    CHECK(std::abs((rigid_transform(q, a) - rigid_transform(q, b)).norm() - (a - b).norm()) <= 1e-12);
  }
}

TEST_CASE("materialize") {
  ParticleSpec spec;
  spec.local_points = {Eigen::Vector3d::UnitZ(), Eigen::Vector3d(0.6, 0.0, 0.8)};
  spec.heights = {1.0, -0.5};
  const ConstraintSet same = materialize(spec, 1.0);
  REQUIRE(same.size() == 2);
  CHECK((same.points[0] - spec.local_points[0]).norm() <= 1e-15);
  CHECK((same.points[1] - spec.local_points[1]).norm() <= 1e-15);
  CHECK(same.targets == spec.heights);

  ParticleSpec lifted;
  lifted.local_points = {Eigen::Vector3d::UnitZ()};
  lifted.heights = {1.0};
  lifted.pose.q = {0.0, 0.0, 0.0, 0.0, 0.0, 2.5};
  CHECK((materialize(lifted, 1.0).points[0] - Eigen::Vector3d::UnitZ()).norm() <= 1e-15);
  CHECK((materialize(lifted, 3.0).points[0] - 3.0 * Eigen::Vector3d::UnitZ()).norm() <= 1e-15);

  const ConstraintSet ico = materialize(icosahedron_particle(1.0), 1.0);
  CHECK(ico.size() == 12);
  const TriangleMesh base = build_icosphere(1.0, 0);
  for (int i = 0; i < 12; ++i) {
    CHECK((ico.points[static_cast<std::size_t>(i)] - base.vertex(i)).norm() <= 1e-14);
    CHECK(ico.targets[static_cast<std::size_t>(i)] == 1.0);
  }

  ParticleSpec origin;
  origin.local_points = {Eigen::Vector3d::UnitZ()};
  origin.heights = {1.0};
  origin.pose.q = {0.0, 0.0, 0.0, 0.0, 0.0, -1.0};
  CHECK_THROWS_AS(materialize(origin, 1.0), GeometryError);

  ParticleSpec twins;
  twins.local_points = {Eigen::Vector3d::UnitZ(), 2.0 * Eigen::Vector3d::UnitZ()};
  twins.heights = {1.0, 1.0};
  CHECK_THROWS_AS(materialize(twins, 1.0), ParameterError);
}

TEST_CASE("constraint set validation and warnings") {
  const double R = 1.0;
  ConstraintSet cs = materialize(icosahedron_particle(R), R);
  CHECK_NOTHROW(validate(cs, R));
  CHECK(wellposedness_warnings(cs, R).empty());

  ConstraintSet bad = cs;
  bad.delta = 0.0;
  CHECK_THROWS_AS(validate(bad, R), ParameterError);
  bad.delta = -1.0;
  CHECK_THROWS_AS(validate(bad, R), ParameterError);
  bad = cs;
  bad.targets.pop_back();
  CHECK_THROWS_AS(validate(bad, R), ParameterError);
  bad = cs;
  bad.point_deltas = {1e-3};
  CHECK_THROWS_AS(validate(bad, R), ParameterError);

  CHECK_FALSE(wellposedness_warnings(materialize(equator_ring(R, 10), R), R).empty());
  const ConstraintSet three = points_on_sphere({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {1, 1, 1});
  CHECK_FALSE(wellposedness_warnings(three, R).empty());
}

TEST_CASE("penalty problem") {
  const Fixture f;
  const ConstraintSet ico = materialize(icosahedron_particle(1.0), 1.0);

  SUBCASE("zero data gives zero") {
    ConstraintSet cs = ico;
    std::fill(cs.targets.begin(), cs.targets.end(), 0.0);
    const ConstraintSolution s = solve_penalty(f.form, cs);
    CHECK(s.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.orthogonality_multipliers.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("icosahedral configuration") {
    const ConstraintSolution s = solve_penalty(f.form, ico);
    for (double v : s.point_values) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    CHECK(symmetry_residual(s.u, vertex_permutation(f.mesh, five_fold(f.mesh))) <= 1e-8);
    CHECK(s.point_residuals.cwiseAbs().maxCoeff() <= 0.05);
  }
  SUBCASE("antipodal pair is odd") {
    const ConstraintSet pair = points_on_sphere({{0.3, 0.5, 0.8}, {-0.3, -0.5, -0.8}}, {1.0, -1.0});
    const ConstraintSolution s = solve_penalty(f.form, pair);
    const std::vector<int> perm = vertex_permutation(f.mesh, -Eigen::Matrix3d::Identity());
    double odd = 0.0;
    for (int i = 0; i < f.mesh.num_vertices(); ++i) odd = std::max(odd, std::abs(s.u[perm[i]] + s.u[i]));
    CHECK(odd <= 1e-9 * s.u.cwiseAbs().maxCoeff());
  }
  SUBCASE("per-point deltas") {
    ConstraintSet cs = ico;
    cs.point_deltas.assign(12, 1e-4);
    const ConstraintSolution uniform = solve_penalty(f.form, ico);
    CHECK((solve_penalty(f.form, cs).u - uniform.u).norm() <= 1e-12 * uniform.u.norm());
    cs.point_deltas[0] = 1e-8;
    const ConstraintSolution stiff = solve_penalty(f.form, cs);
    CHECK(std::abs(stiff.point_residuals[0]) < std::abs(stiff.point_residuals[1]));
  }
  SUBCASE("delta must be positive") {
    ConstraintSet cs = ico;
    cs.delta = 0.0;
    CHECK_THROWS_AS(solve_penalty(f.form, cs), ParameterError);
  }
}

TEST_CASE("hard problem") {
  const Fixture f;

  SUBCASE("zero data gives zero") {
    ConstraintSet cs = materialize(icosahedron_particle(1.0), 1.0);
    std::fill(cs.targets.begin(), cs.targets.end(), 0.0);
    CHECK(solve_hard(f.form, cs).u.cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("four points with linear data") {
    const Eigen::Vector3d w(0.4, -1.2, 0.7);
    std::vector<Eigen::Vector3d> pts{{1, 0.2, 0.1}, {-0.3, 1, 0.2}, {0.1, -0.4, 1}, {-0.5, -0.5, -0.7}};
    std::vector<double> targets;
    for (auto& p : pts) {
      p.normalize();
      targets.push_back(p.dot(w));
    }
    const ConstraintSolution s = solve_hard(f.form, points_on_sphere(pts, targets));
    CHECK(s.point_residuals.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs((f.form.constraints * s.u).maxCoeff()) <= 1e-10);
  }
  SUBCASE("ten-fold equator ring") {
    const TriangleMesh mesh = build_bipyramid_sphere(1.0, 10, 3);
    const QuadraticForm form = assemble_a(mesh, ModelParams{});
    const ConstraintSolution s = solve_hard(form, materialize(equator_ring(1.0, 10), 1.0));
    CHECK(s.point_residuals.cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::Matrix3d turn = Eigen::AngleAxisd(pi / 5.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    CHECK(symmetry_residual(s.u, vertex_permutation(mesh, turn)) <= 1e-8);
  }
  SUBCASE("points in one triangle are dependent") {
    const auto t = f.mesh.triangles.row(5);
    const Eigen::Vector3d a = f.mesh.vertex(t[0]), b = f.mesh.vertex(t[1]), c = f.mesh.vertex(t[2]);
    std::vector<Eigen::Vector3d> pts{(2 * a + b + c) / 4, (a + 2 * b + c) / 4, (a + b + 2 * c) / 4, (a + b + c) / 3};
    CHECK_THROWS_AS(solve_hard(f.form, points_on_sphere(pts, {1, 1, 1, 1})), RankDeficiencyError);
  }
  SUBCASE("polar rings are odd under z mirror") {
    const ConstraintSet cs = merge({materialize(polar_ring_pair(1.0, 6, 0.5)[0], 1.0),
                                    materialize(polar_ring_pair(1.0, 6, 0.5)[1], 1.0)});
    const ConstraintSolution s = solve_hard(f.form, cs);
    CHECK(s.point_residuals.cwiseAbs().maxCoeff() <= 1e-10);
    const std::vector<int> perm = vertex_permutation(f.mesh, Eigen::Vector3d(1, 1, -1).asDiagonal());
    double odd = 0.0;
    for (int i = 0; i < f.mesh.num_vertices(); ++i) odd = std::max(odd, std::abs(s.u[perm[i]] + s.u[i]));
    CHECK(odd <= 1e-9 * s.u.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("penalty energy never exceeds the hard energy") {
  const Fixture f;
  const ConstraintSet cs = materialize(icosahedron_particle(1.0), 1.0);
  const double hard = solve_hard(f.form, cs).bending_energy;
  for (double delta : {1e-1, 1e-3, 1e-5}) {
    ConstraintSet c = cs;
    c.delta = delta;
    const ConstraintSolution s = solve_penalty(f.form, c);
    CHECK(s.bending_energy + s.penalty_energy <= hard * (1.0 + 1e-12));
  }
}

TEST_CASE("solutions rotate with the constraints") {
  const Fixture f;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  std::vector<Eigen::Vector3d> pts;
  std::vector<double> targets;
  for (int j = 0; j < 7; ++j) {
    pts.emplace_back(N(rng), N(rng), N(rng));
    targets.push_back(N(rng));
  }
  const ConstraintSet cs = points_on_sphere(pts, targets);
  const Eigen::Matrix3d Q = five_fold(f.mesh);
  ConstraintSet rotated = cs;
  for (auto& p : rotated.points) p = Q * p;
  const std::vector<int> perm = vertex_permutation(f.mesh, Q);

  for (bool hard : {false, true}) {
    const Vector u = hard ? solve_hard(f.form, cs).u : solve_penalty(f.form, cs).u;
    const Vector v = hard ? solve_hard(f.form, rotated).u : solve_penalty(f.form, rotated).u;
    double worst = 0.0;
    for (int i = 0; i < f.mesh.num_vertices(); ++i) worst = std::max(worst, std::abs(v[perm[i]] - u[i]));
    CHECK(worst <= 1e-8 * u.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("reactions balance the constant direction") {
  const Fixture f;
  const ConstraintSolution s = solve_hard(f.form, materialize(icosahedron_particle(1.0), 1.0));
  const Vector c1 = f.form.constraints * Vector::Ones(f.mesh.num_vertices());
  const double balance = c1.dot(s.orthogonality_multipliers) + s.point_multipliers.sum();
  CHECK(std::abs(balance) <= 1e-8 * s.point_multipliers.cwiseAbs().sum());
}

TEST_CASE("convergence study") {
  const Fixture f;
  const ConstraintSet cs = materialize(icosahedron_particle(1.0), 1.0);
  const std::vector<double> deltas{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  const ConvergenceStudy one = convergence_study(f.form, cs, deltas, 1);
  CHECK(one.monotone);
  CHECK(one.rate_in_range());
  CHECK(one.rows.back().max_point_residual < one.rows.front().max_point_residual);
  CHECK(one.rows.back().max_point_residual <= 1e-3);

  const ConvergenceStudy two = convergence_study(f.form, cs, deltas, 2);
  for (std::size_t i = 0; i < deltas.size(); ++i) CHECK(two.rows[i].h2_error == one.rows[i].h2_error);
  CHECK(two.rate == one.rate);

  CHECK_THROWS_AS(convergence_study(f.form, cs, {1e-2, 1e-3, 1e-5}), ParameterError);
  CHECK_THROWS_AS(convergence_study(f.form, cs, {1e-2, 1e-3, 1e-4, 1e-3}), ParameterError);
  CHECK_THROWS_AS(convergence_study(f.form, cs, {1e-2, 5e-3, 2e-3, 1e-3}), ParameterError);
}
