#include "memfem/error.hpp"
#include "memfem/linear_solvers.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <random>

using namespace memfem;

namespace {

SparseMatrix sparse(const Eigen::MatrixXd& d) { return d.sparseView(); }

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// dense oracle for [A B^T; B 0] [x; l] = [f; g]
Eigen::VectorXd dense_kkt(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Vector& f, const Vector& g) {
  const auto n = A.rows();
  const auto m = B.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = A;
  K.topRightCorner(n, m) = B.transpose();
  K.bottomLeftCorner(m, n) = B;
  Vector rhs(n + m);
  rhs << f, g;
  return K.fullPivLu().solve(rhs);
}

}  // namespace

TEST_CASE("mass solve recovers constants") {
  const SurfaceOperators ops = make_operators(build_icosphere(1.0, 3));
  const Vector one = Vector::Ones(ops.size());
  CHECK((solve_spd(ops.mass, ops.mass * one) - one).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("solve_spd rejects indefinite matrices") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(4, 4);
  A(2, 2) = -1.0;
  CHECK_THROWS_AS(solve_spd(sparse(A), Vector::Ones(4)), SolverError);
}

TEST_CASE("saddle system with the mean row") {
  const SurfaceOperators ops = make_operators(build_icosphere(1.0, 2));
  const Vector one = Vector::Ones(ops.size());
  SaddleSystem sys;
  sys.A = ops.mass;
  sys.B = SparseMatrix(Vector(ops.mass * one).transpose().sparseView());
  sys.f = ops.mass * one;
  sys.g = Vector::Zero(1);
  const SaddleSolution sol = solve_saddle(sys);
  CHECK(sol.x.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(sol.multipliers[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random SPD system agrees with a dense solve") {
  const Eigen::MatrixXd G = random_matrix(10, 10, 4);
  const Eigen::MatrixXd A = G * G.transpose() + 0.5 * Eigen::MatrixXd::Identity(10, 10);
  const Vector b = random_matrix(10, 1, 5);
  const Vector dense = A.lu().solve(b);
  CHECK((solve_spd(sparse(A), b) - dense).norm() <= 1e-10 * dense.norm());
}

TEST_CASE("saddle solves match the dense KKT oracle on every path") {
  const Eigen::MatrixXd G = random_matrix(12, 12, 8);
  const Eigen::MatrixXd spd = G * G.transpose() + Eigen::MatrixXd::Identity(12, 12);
  Eigen::MatrixXd indefinite = spd;
  indefinite.diagonal().head(3).array() -= 40.0;
  const Eigen::MatrixXd B = random_matrix(3, 12, 9);
  const Vector f = random_matrix(12, 1, 10);
  const Vector g = random_matrix(3, 1, 11);

  struct Case {
    const Eigen::MatrixXd* A;
    SaddleSolver::Method method;
  };
  for (const Case& c : {Case{&spd, SaddleSolver::Method::Auto}, Case{&indefinite, SaddleSolver::Method::Auto},
                        Case{&indefinite, SaddleSolver::Method::LU}, Case{&spd, SaddleSolver::Method::Symmetric}}) {
    const SaddleSolver solver(sparse(*c.A), sparse(B), c.method);
    const SaddleSolution sol = solver.solve(f, g);
    const Vector ref = dense_kkt(*c.A, B, f, g);
    CHECK((sol.x - ref.head(12)).norm() <= 1e-10 * ref.norm());
    CHECK((sol.multipliers - ref.tail(3)).norm() <= 1e-10 * ref.norm());
    CHECK(sol.constraint_residual <= 1e-12 * g.norm() * 10);
  }
  CHECK(SaddleSolver(sparse(spd), sparse(B)).uses_cholesky());
  CHECK_FALSE(SaddleSolver(sparse(indefinite), sparse(B)).uses_cholesky());
}

TEST_CASE("dependent constraint rows are reported by index") {
  Eigen::MatrixXd B = random_matrix(4, 8, 12);
  B.row(2) = 2.0 * B.row(0) - B.row(1);
  try {
    check_constraint_rank(sparse(B));
    FAIL("expected a rank deficiency");
  } catch (const RankDeficiencyError& e) {
    CHECK(e.row() == 2);
  }
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(8, 8);
  CHECK_THROWS_AS(SaddleSolver(sparse(A), sparse(B)), RankDeficiencyError);
}

TEST_CASE("lowest generalized eigenpairs of a diagonal pencil") {
  Eigen::VectorXd a(6);
  a << 5, 1, 4, 2, 6, 3;
  const SparseMatrix A = sparse(Eigen::MatrixXd(a.asDiagonal()));
  const SparseMatrix M = sparse(Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(6, 6)));
  const EigenPairs e = lowest_generalized_eigenpairs(A, M, 2, 0.0);
  CHECK(e.values[0] == doctest::Approx(0.5));
  CHECK(e.values[1] == doctest::Approx(1.0));

  // restricted to x_1 = 0 (the smallest diagonal entry is index 1)
  const SparseMatrix C = sparse(Eigen::MatrixXd(Eigen::RowVectorXd::Unit(6, 1)));
  const EigenPairs r = lowest_generalized_eigenpairs(A, M, 1, 0.0, C);
  CHECK(r.values[0] == doctest::Approx(1.0));
}
