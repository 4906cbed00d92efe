#include "memfem/linear_solvers.hpp"

#include "memfem/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace memfem {

Vector solve_spd(const SparseMatrix& A, const Vector& rhs) {
  if (A.rows() != A.cols() || A.rows() != rhs.size()) throw ParameterError("solve_spd: dimension mismatch");
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverError("solve_spd: factorization failed");
  if ((ldlt.vectorD().array() <= 0.0).any()) throw SolverError("solve_spd: matrix is not positive definite");
  Vector x = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) throw SolverError("solve_spd: solve failed");
  return x;
}

void check_constraint_rank(const SparseMatrix& B, double tolerance) {
  const Eigen::MatrixXd rows = Eigen::MatrixXd(B);
  std::vector<Vector> basis;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Vector r = rows.row(i).transpose();
    const double norm = r.norm();
    if (!(norm > 0.0)) throw RankDeficiencyError("constraint row " + std::to_string(i) + " is zero", static_cast<int>(i));
    r /= norm;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) r -= q.dot(r) * q;
    const double remaining = r.norm();
    if (remaining < tolerance)
      throw RankDeficiencyError("constraint row " + std::to_string(i) +
                                    " is linearly dependent on earlier rows (residual " +
                                    std::to_string(remaining) + ")",
                                static_cast<int>(i));
    basis.push_back(r / remaining);
  }
}

SaddleSolver::SaddleSolver(const SparseMatrix& A, const SparseMatrix& B, Method method)
    : n_(static_cast<int>(A.rows())), m_(static_cast<int>(B.rows())), A_(A), B_(B) {
  if (A.rows() != A.cols()) throw ParameterError("saddle block A must be square");
  if (m_ > 0 && B.cols() != A.cols()) throw ParameterError("constraint rows have wrong length");
  if (m_ > 0) check_constraint_rank(B);
  if (method == Method::LU || !try_ldlt(method == Method::Symmetric)) factorize_kkt();
}

bool SaddleSolver::try_ldlt(bool allow_indefinite) {
  if (asymmetry(A_) > 1e-12) return false;
  auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(A_);
  if (ldlt->info() != Eigen::Success) return false;
  const Vector& d = ldlt->vectorD();
  // only well-separated pivots; anything else is left to LU
  const double smallest = allow_indefinite ? d.cwiseAbs().minCoeff() : d.minCoeff();
  if (!(smallest > 1e-12 * d.cwiseAbs().maxCoeff())) return false;
  if (m_ > 0) {
    inv_a_bt_ = ldlt->solve(Eigen::MatrixXd(B_.transpose()));
    const Eigen::MatrixXd schur = B_ * inv_a_bt_;
    schur_.compute(schur);
  }
  ldlt_ = std::move(ldlt);
  return true;
}

void SaddleSolver::factorize_kkt() {
  double a_max = 0.0;
  for (int k = 0; k < A_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A_, k); it; ++it) a_max = std::max(a_max, std::abs(it.value()));
  if (a_max == 0.0) a_max = 1.0;

  Vector row_max = Vector::Zero(m_);
  for (int k = 0; k < B_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(B_, k); it; ++it)
      row_max[it.row()] = std::max(row_max[it.row()], std::abs(it.value()));
  row_scale_ = Vector::Constant(m_, a_max).cwiseQuotient(row_max);

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(A_.nonZeros() + 2 * B_.nonZeros()));
  for (int k = 0; k < A_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A_, k); it; ++it) entries.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < B_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(B_, k); it; ++it) {
      const double v = it.value() * row_scale_[it.row()];
      entries.emplace_back(n_ + it.row(), it.col(), v);
      entries.emplace_back(it.col(), n_ + it.row(), v);
    }
  kkt_.resize(n_ + m_, n_ + m_);
  kkt_.setFromTriplets(entries.begin(), entries.end());
  kkt_.makeCompressed();

  lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
  lu_->analyzePattern(kkt_);
  lu_->factorize(kkt_);
  if (lu_->info() != Eigen::Success)
    throw SolverError("saddle system factorization failed: " + lu_->lastErrorMessage());
}


void SaddleSolver::solve_once(const Vector& f, const Vector& g, Vector& x, Vector& lambda) const {
  if (ldlt_) {
    x = ldlt_->solve(f);
    if (m_ > 0) {
      lambda = schur_.solve(B_ * x - g);
      x -= inv_a_bt_ * lambda;
    } else {
      lambda = Vector::Zero(0);
    }
    return;
  }
  Vector rhs(n_ + m_);
  rhs << f, g.cwiseProduct(row_scale_);
  const Vector z = lu_->solve(rhs);
  x = z.head(n_);
  lambda = z.tail(m_).cwiseProduct(row_scale_);
}

SaddleSolution SaddleSolver::solve(const Vector& f, const Vector& g) const {
  if (f.size() != n_ || g.size() != m_) throw ParameterError("saddle right-hand side has wrong size");
  SaddleSolution s;
  solve_once(f, g, s.x, s.multipliers);
  if (!s.x.allFinite() || !s.multipliers.allFinite())
    throw SolverError("saddle solve produced non-finite values (singular system?)");
  // one step of iterative refinement, skipped when the first solve is already
  // at rounding level
  const Vector rf = f - A_ * s.x - (m_ > 0 ? Vector(B_.transpose() * s.multipliers) : Vector::Zero(n_));
  const Vector rg = m_ > 0 ? Vector(g - B_ * s.x) : Vector::Zero(0);
  const double level = 1e-14 * (f.norm() + g.norm() + 1e-300);
  if (rf.norm() > level || rg.norm() > level) {
    Vector dx, dl;
    solve_once(rf, rg, dx, dl);
    s.x += dx;
    s.multipliers += dl;
  }

  const Vector Bt_lambda = m_ > 0 ? Vector(B_.transpose() * s.multipliers) : Vector::Zero(n_);
  const Vector Ax = A_ * s.x;
  s.primal_residual = (Ax + Bt_lambda - f).norm();
  s.constraint_residual = m_ > 0 ? (B_ * s.x - g).norm() : 0.0;
  const double scale = f.norm() + Ax.norm() + Bt_lambda.norm();
  if (s.primal_residual > 1e-6 * std::max(scale, 1e-300) && scale > 0.0)
    throw SolverError("saddle solve did not converge (relative residual " +
                      std::to_string(s.primal_residual / scale) + "); system is likely singular");
  return s;
}

SaddleSolution solve_saddle(const SaddleSystem& system) {
  SaddleSolver solver(system.A, system.B);
  return solver.solve(system.f, system.g);
}

namespace {

// Make the columns of Y M-orthonormal; drops nothing, so Y must have full rank.
void m_orthonormalize(Eigen::MatrixXd& Y, const SparseMatrix& M) {
  const Eigen::MatrixXd G = Y.transpose() * (M * Y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
  const Vector d = es.eigenvalues().cwiseMax(1e-300 * es.eigenvalues().maxCoeff());
  Y = Y * es.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal();
}

}  // namespace

EigenPairs lowest_generalized_eigenpairs(const SparseMatrix& A, const SparseMatrix& M, int count, double shift,
                                         const std::optional<SparseMatrix>& constraints, double tolerance,
                                         int max_iterations) {
  const int n = static_cast<int>(A.rows());
  const int m = constraints ? static_cast<int>(constraints->rows()) : 0;
  const int block = std::min(n - m, count + std::max(8, count));
  if (count <= 0 || block < count) throw ParameterError("eigen solve: invalid count");

  const SparseMatrix shifted = A + shift * M;
  const SaddleSolver solver(shifted, constraints ? *constraints : SparseMatrix(0, n));

  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, block);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);

  EigenPairs result;
  Vector previous = Vector::Constant(count, std::numeric_limits<double>::infinity());
  const Vector zero_g = Vector::Zero(m);
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd Y(n, block);
    const Eigen::MatrixXd MX = M * X;
    for (int j = 0; j < block; ++j) Y.col(j) = solver.solve(MX.col(j), zero_g).x;
    m_orthonormalize(Y, M);
    const Eigen::MatrixXd Ar = Y.transpose() * (A * Y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Ar + Ar.transpose()));
    X = Y * es.eigenvectors();
    const Vector current = es.eigenvalues().head(count);
    const double change =
        ((current - previous).cwiseAbs().array() / current.cwiseAbs().array().max(1.0)).maxCoeff();
    previous = current;
    result.iterations = it;
    if (change < tolerance) break;
  }
  result.values = previous;
  result.vectors = X.leftCols(count);
  return result;
}

}  // namespace memfem
