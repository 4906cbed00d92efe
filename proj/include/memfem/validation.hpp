#pragma once

#include "memfem/phase_field.hpp"
#include "memfem/quadratic_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace memfem {

/// Outcome of one property check. `detail` holds the measured numbers.
struct CheckResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Area and volume of the icosphere against the round sphere at `level`, and
/// the error reduction from level - 1. `tolerance` applies at `level`.
CheckResult check_sphere_geometry(int level = 5, double tolerance = 3e-3, double min_ratio = 3.5);

/// Lowest 16 eigenvalues of (S, M) against l(l+1)/R^2 for l <= 3.
CheckResult check_spectrum(int level = 5, double tolerance = 2e-2);

struct FormDiagnostics {
  int level = 0;
  double a11_error = 0.0;           // |a(1,1) + 8 pi sigma| / (8 pi sigma)
  double nu_backward_error = 0.0;   // max_i |A nu_i|_{M^-1} / (lambda_max(A, M) |nu_i|_M)
  double nu_h2_dual = 0.0;          // max_i sup_v (A nu_i, v) / |v|_{H2}
  double min_eigenvalue = 0.0;      // smallest eigenvalue of A on U_nu
};

FormDiagnostics form_diagnostics(int level, const ModelParams& params = {});

/// a(1,1), the residual of A on the translations and coercivity on U_nu over
/// levels first..last (kappa = sigma = R = 1).
CheckResult check_quadratic_form(int first = 3, int last = 5, double a11_tolerance = 1e-2,
                                 double nu_tolerance = 5e-2);

/// Log-log slope of the second-order Taylor residual for the zonal degree-2
/// field.
CheckResult check_taylor(int level = 5, double required_slope = 2.7);

/// Penalty vs hard solutions on the icosahedral configuration.
CheckResult check_penalty_convergence(int level = 4, int threads = 1);

/// Interpolation, zero data and symmetry of the hard problem on the
/// icosahedral and ten-fold equatorial configurations.
CheckResult check_hard_constraints(int level = 4);

struct SweepRun {
  double Lambda = 0.0;
  PhaseState final_state;
  FlowReport report;
  double correlation = 0.0;
  double seconds = 0.0;
};

struct SweepSettings {
  int level = 4;
  PhaseFieldParams params;
  std::vector<double> lambdas{-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0};
  std::uint64_t seed = 7;
  double noise = 0.01;
  int threads = 1;
};

/// Independent flows from the same seeded initial data, one per Lambda.
std::vector<SweepRun> lambda_sweep(const QuadraticForm& form, const SweepSettings& settings);

/// Stationarity, monotone energy, exact constraints, the sign flip of the
/// u-phi correlation between Lambda = -5 and 5, and u = 0 for Lambda = 0.
CheckResult check_flow_sweep(const std::vector<SweepRun>& runs, const SweepSettings& settings);

/// Step multipliers at the final states against the closed forms.
CheckResult check_multipliers(const std::vector<SweepRun>& runs, const QuadraticForm& form,
                              const SweepSettings& settings);

/// Step residual at next == previous against central differences of the
/// energy in 10 seeded random directions.
CheckResult check_gradient(int level = 2, double tolerance = 1e-5);

std::string format_check(const CheckResult& result);

}  // namespace memfem
