#include "memfem/quadratic_model.hpp"

#include "memfem/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace memfem {

void ModelParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ParameterError("kappa must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be nonnegative");
  if (!(R > 0.0) || !std::isfinite(R)) throw ParameterError("R must be positive");
}

namespace {

void check_radius(const TriangleMesh& mesh, double R) {
  if (mesh.radius_hint && std::abs(*mesh.radius_hint - R) > 1e-12 * R)
    throw ParameterError("mesh radius " + std::to_string(*mesh.radius_hint) + " does not match model radius " +
                         std::to_string(R));
  const double worst = (mesh.vertices.rowwise().norm().array() - R).abs().maxCoeff();
  if (worst > 1e-9 * R)
    throw ParameterError("mesh vertices are not on the sphere of radius " + std::to_string(R) +
                         " (max deviation " + std::to_string(worst) + ")");
}

SparseMatrix consistent_bending(const SurfaceOperators& ops) {
  constexpr int kDenseLimit = 3000;
  if (ops.size() > kDenseLimit)
    throw SizeLimitError("consistent-mass reconstruction is dense; limited to " + std::to_string(kDenseLimit) +
                         " vertices");
  Eigen::SimplicialLDLT<SparseMatrix> mass(ops.mass);
  const Eigen::MatrixXd S = Eigen::MatrixXd(ops.stiffness);
  const Eigen::MatrixXd MinvS = mass.solve(S);
  Eigen::MatrixXd bend = S * MinvS;
  bend = 0.5 * (bend + bend.transpose());
  return bend.sparseView();
}

}  // namespace

SparseMatrix constraint_rows(const TriangleMesh& mesh, const SparseMatrix& mass) {
  const int n = mesh.num_vertices();
  const double R = mesh.radius_hint ? *mesh.radius_hint : mesh.vertices.rowwise().norm().mean();
  Eigen::MatrixXd K(n, 4);
  K.col(0).setOnes();
  K.rightCols(3) = mesh.vertices / R;
  const Eigen::MatrixXd rows = (mass * K).transpose();
  return rows.sparseView();
}

QuadraticForm assemble_a(const TriangleMesh& mesh, const ModelParams& params, Reconstruction reconstruction) {
  params.validate();
  check_radius(mesh, params.R);

  QuadraticForm form;
  form.mesh = mesh;
  form.params = params;
  form.ops = make_operators(mesh);
  const SurfaceOperators& ops = form.ops;
  const double R2 = params.R * params.R;

  const SparseMatrix bending = reconstruction == Reconstruction::LumpedMass
                                   ? SparseMatrix(ops.stiffness * ops.lumped.cwiseInverse().asDiagonal() *
                                                  ops.stiffness)
                                   : consistent_bending(ops);
  form.A = params.kappa * bending + (params.sigma - 2.0 * params.kappa / R2) * ops.stiffness -
           (2.0 * params.sigma / R2) * ops.mass;
  // the triple product is symmetric only up to rounding
  form.A = 0.5 * (SparseMatrix(form.A) + SparseMatrix(form.A.transpose()));
  form.A.prune(0.0);
  form.A.makeCompressed();

  form.constraints = constraint_rows(mesh, ops.mass);
  form.kernel.resize(mesh.num_vertices(), 4);
  form.kernel.col(0).setOnes();
  form.kernel.rightCols(3) = mesh.vertices / params.R;
  return form;
}

double quadratic_lagrangian(const Vector& u, double mu, const QuadraticForm& form) {
  if (u.size() != form.size()) throw ParameterError("field length does not match the form's mesh");
  return 0.5 * form.evaluate(u, u) + mu * (form.constraints * u)[0];
}

double harmonic_rayleigh_quotient(const ModelParams& p, int degree) {
  const double lambda = degree * (degree + 1.0) / (p.R * p.R);
  return p.kappa * lambda * lambda + (p.sigma - 2.0 * p.kappa / (p.R * p.R)) * lambda - 2.0 * p.sigma / (p.R * p.R);
}

Vector zonal_degree2(const TriangleMesh& mesh) {
  const Vector r2 = mesh.vertices.rowwise().squaredNorm();
  return (3.0 * mesh.vertices.col(2).array().square() / r2.array() - 1.0).matrix();
}

}  // namespace memfem
