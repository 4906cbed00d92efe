#pragma once

#include "memfem/fem_core.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <memory>
#include <optional>

namespace memfem {

/// Sparse Cholesky (LDL^T) solve. Throws SolverError when A is not SPD.
Vector solve_spd(const SparseMatrix& A, const Vector& rhs);

/// A x + B^T lambda = f,  B x = g.
/// Rows of B are linear functionals on vertex fields.
struct SaddleSystem {
  SparseMatrix A;
  SparseMatrix B;
  Vector f;
  Vector g;
};

struct SaddleSolution {
  Vector x;
  Vector multipliers;
  double primal_residual = 0.0;      // |A x + B^T lambda - f|
  double constraint_residual = 0.0;  // |B x - g|
};

/// Throws RankDeficiencyError naming the first row of B that is (relative to
/// `tolerance`) a linear combination of the rows before it.
void check_constraint_rank(const SparseMatrix& B, double tolerance = 1e-10);

/// Factorizes once and solves for many right-hand sides.
///
/// A symmetric positive definite A is factorized by sparse Cholesky and the
/// constraints are eliminated through the (small, dense) Schur complement.
/// Method::Symmetric extends this to symmetric indefinite A whose leading
/// minors are safely nonzero; the caller vouches for that.
/// Otherwise the whole KKT matrix goes to sparse LU, with constraint rows
/// rescaled to the magnitude of A; multipliers are returned in the caller's
/// scaling either way. Each solve applies one step of iterative refinement.
class SaddleSolver {
 public:
  enum class Method {
    Auto,        // Cholesky when A is SPD, LU otherwise
    Symmetric,   // LDL^T without pivoting; A symmetric and nonsingular, possibly indefinite
    LU,
  };

  SaddleSolver(const SparseMatrix& A, const SparseMatrix& B, Method method = Method::Auto);

  bool uses_cholesky() const { return static_cast<bool>(ldlt_); }

  SaddleSolution solve(const Vector& f, const Vector& g) const;

  int primal_size() const { return n_; }
  int constraint_count() const { return m_; }

 private:
  void solve_once(const Vector& f, const Vector& g, Vector& x, Vector& lambda) const;
  bool try_ldlt(bool allow_indefinite);
  void factorize_kkt();

  int n_;
  int m_;
  SparseMatrix A_;
  SparseMatrix B_;
  Vector row_scale_;
  SparseMatrix kkt_;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
  Eigen::MatrixXd inv_a_bt_;  // A^{-1} B^T
  Eigen::PartialPivLU<Eigen::MatrixXd> schur_;
};

SaddleSolution solve_saddle(const SaddleSystem& system);

struct EigenPairs {
  Vector values;          // ascending
  Eigen::MatrixXd vectors;  // M-orthonormal columns
  int iterations = 0;
};

/// Lowest `count` eigenpairs of A x = lambda M x by shift-and-invert subspace
/// iteration with Rayleigh-Ritz. A + shift*M must be nonsingular on the
/// admissible space. If `constraints` is given, the problem is restricted to
/// {x : constraints * x = 0}.
EigenPairs lowest_generalized_eigenpairs(const SparseMatrix& A, const SparseMatrix& M, int count,
                                         double shift = 0.0,
                                         const std::optional<SparseMatrix>& constraints = std::nullopt,
                                         double tolerance = 1e-10, int max_iterations = 300);

}  // namespace memfem
