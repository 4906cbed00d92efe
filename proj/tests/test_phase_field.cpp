#include "memfem/error.hpp"
#include "memfem/phase_field.hpp"
#include "memfem/validation.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

using namespace memfem;

namespace {

QuadraticForm small_form(int level = 2) { return assemble_a(build_icosphere(1.0, level), ModelParams{}); }

PhaseState state_of(const QuadraticForm& form, double phi, double u = 0.0) {
  PhaseState s;
  s.phi = Vector::Constant(form.size(), phi);
  s.u = Vector::Constant(form.size(), u);
  return s;
}

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("potentials") {
  PhaseFieldParams p;
  p.Lambda = 0.0;
  for (double phi : {-1.0, 1.0}) {
    const Potentials w = potentials(phi, p, 1.0);
    CHECK(w.W == 0.0);
    CHECK(w.dW == 0.0);
  }
  p.Lambda = 3.0;
  const Potentials zero = potentials(0.0, p, 1.0);
  CHECK(zero.W == 0.25);
  CHECK(zero.df == 0.0);

  PhaseFieldParams unit;
  unit.epsilon = unit.b = unit.Lambda = 1.0;
  const Potentials two = potentials(2.0, unit, 1.0);
  CHECK(two.f == doctest::Approx(17.0 / 4.0));
  CHECK(two.df == doctest::Approx(6.0 + 2.0));
}

TEST_CASE("parameter validation") {
  PhaseFieldParams p;
  CHECK_NOTHROW(p.validate());
  for (auto bad : {&PhaseFieldParams::epsilon, &PhaseFieldParams::b, &PhaseFieldParams::alpha1,
                   &PhaseFieldParams::alpha2, &PhaseFieldParams::tau}) {
    PhaseFieldParams q;
    q.*bad = 0.0;
    CHECK_THROWS_AS(q.validate(), ParameterError);
  }
  PhaseFieldParams q;
  q.alpha = 1.0;
  CHECK_THROWS_AS(q.validate(), ParameterError);
}

TEST_CASE("energy of simple states") {
  const QuadraticForm form = small_form(3);
  PhaseFieldParams p;
  p.Lambda = 5.0;
  const PhaseEnergy flat = energy_E(state_of(form, p.alpha), form, p);
  const double expected = p.b / p.epsilon * form.ops.area() * potentials(p.alpha, p, 1.0).f;
  CHECK(flat.total == doctest::Approx(expected).epsilon(1e-12));
  CHECK(flat.bending == 0.0);
  CHECK(flat.coupling == 0.0);

  p.Lambda = 0.0;
  PhaseState s = state_of(form, 0.0);
  s.u = zonal_degree2(form.mesh);
  s.phi = 0.3 + 0.5 * form.mesh.vertices.col(0).array();
  const PhaseEnergy e = energy_E(s, form, p);
  CHECK(e.coupling == 0.0);
  CHECK(e.total == e.bending + e.gradient + e.bulk);
  CHECK(e.bending == doctest::Approx(0.5 * form.evaluate(s.u, s.u)));
}

TEST_CASE("translations change the energy only by a vanishing defect") {
  PhaseFieldParams p;
  p.Lambda = 5.0;
  std::vector<double> defect;
  for (int level = 2; level <= 5; ++level) {
    const QuadraticForm form = small_form(level);
    PhaseState s = state_of(form, 0.0);
    s.u = zonal_degree2(form.mesh);
    s.phi = 0.3 + 0.5 * form.mesh.vertices.col(0).array();
    PhaseState moved = s;
    moved.u += 0.3 * form.mesh.vertices.col(2);
    defect.push_back(relative(energy_E(s, form, p).total, energy_E(moved, form, p).total));
  }
  for (std::size_t i = 1; i < defect.size(); ++i) CHECK(defect[i - 1] / defect[i] >= 2.0);
  CHECK(defect.back() <= 1e-3);
}

TEST_CASE("closed-form multipliers") {
  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  p.alpha = 0.0;
  p.Lambda = 5.0;
  CHECK(multipliers(state_of(form, 0.0), form, p).lambda_phi == 0.0);

  p.alpha = 0.3;
  CHECK(multipliers(state_of(form, 0.3), form, p).lambda_u == doctest::Approx(-3.0));
  CHECK(multipliers(state_of(form, 1.0), form, p).lambda_phi == doctest::Approx(-25.0).epsilon(1e-12));
}

TEST_CASE("gradient of the step residual matches finite differences") {
  const CheckResult r = check_gradient(2, 1e-5);
  CHECK_MESSAGE(r.passed, r.detail);

  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  p.Lambda = 3.0;
  const PhaseState s = noisy_initial_state(form, p, 4, 0.5);
  const FlowStepper stepper(form, p);
  const Vector g = energy_gradient(s, form, p);
  CHECK((stepper.residual(s, s) - g).norm() <= 1e-10 * g.norm());
}

TEST_CASE("single steps") {
  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  p.tau = 0.05;

  SUBCASE("zero phase with zero mean is stationary") {
    p.alpha = 0.0;
    p.Lambda = 0.0;
    const StepResult r = flow_step(state_of(form, 0.0), form, p);
    REQUIRE(r.accepted);
    CHECK(r.state.phi.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(r.state.u.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(r.velocity <= 1e-12);
  }
  SUBCASE("constraints hold after every step") {
    p.Lambda = 5.0;
    PhaseState s = noisy_initial_state(form, p, 9, 0.5);
    const FlowStepper stepper(form, p);
    for (int k = 0; k < 20; ++k) {
      const StepResult r = stepper.step(s);
      REQUIRE(r.accepted);
      CHECK(r.energy_after <= r.energy_before + 1e-8 * std::abs(r.energy_before));
      CHECK(constraint_residuals(r.state, form, p).max() <= 1e-10);
      CHECK(r.state.t == doctest::Approx(s.t + p.tau));
      s = r.state;
    }
  }
  SUBCASE("without coupling u stays zero") {
    p.Lambda = 0.0;
    PhaseState s = noisy_initial_state(form, p, 9, 0.5);
    const FlowStepper stepper(form, p);
    for (int k = 0; k < 20; ++k) s = stepper.step(s).state;
    CHECK(s.u.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((s.phi.array() - p.alpha).abs().maxCoeff() > 1e-3);
  }
}

TEST_CASE("flow without coupling decreases the energy to a stationary state") {
  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  FlowReport report;
  const PhaseState end = run_flow(noisy_initial_state(form, p, 7, 0.01), form, p, report);
  CHECK(report.status == FlowStatus::Stationary);
  CHECK(report.energy_monotone);
  for (std::size_t i = 1; i < report.history.size(); ++i)
    CHECK(report.history[i].energy.total <= report.history[i - 1].energy.total + 1e-8);
  CHECK(report.max_constraint_residual <= 1e-10);
  CHECK(end.u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(report.history.back().velocity < p.stat_tol);
  CHECK(report.history.front().energy.total > report.history.back().energy.total);
}

TEST_CASE("doubling mobilities and step gives the same iterates at doubled times") {
  const QuadraticForm form = small_form();
  PhaseFieldParams slow;
  slow.Lambda = 5.0;
  slow.tau = 0.05;
  PhaseFieldParams scaled = slow;
  scaled.alpha1 *= 2.0;
  scaled.alpha2 *= 2.0;
  scaled.tau *= 2.0;
  PhaseState a = noisy_initial_state(form, slow, 2, 0.3);
  PhaseState b = a;
  const FlowStepper sa(form, slow), sb(form, scaled);
  for (int k = 0; k < 30; ++k) {
    a = sa.step(a).state;
    b = sb.step(b).state;
  }
  CHECK(b.t == doctest::Approx(2.0 * a.t));
  CHECK((a.phi - b.phi).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.u - b.u).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("reversing the coupling flips u") {
  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  p.Lambda = 5.0;
  p.max_steps = 200;
  const PhaseState start = noisy_initial_state(form, p, 7, 0.05);
  FlowReport rp, rm;
  const PhaseState plus = run_flow(start, form, p, rp);
  p.Lambda = -5.0;
  const PhaseState minus = run_flow(start, form, p, rm);
  CHECK((plus.u + minus.u).cwiseAbs().maxCoeff() <= 1e-10 * plus.u.cwiseAbs().maxCoeff());
  CHECK((plus.phi - minus.phi).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(phase_correlation(plus, form, p) == doctest::Approx(-phase_correlation(minus, form, p)));
}

TEST_CASE("rejected steps halve tau and repeated rejection aborts") {
  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  p.stabilization = 0.0;
  p.tau = 1e3;
  p.max_steps = 50;
  p.max_rejections = 20;
  const PhaseState start = noisy_initial_state(form, p, 1, 0.9);

  FlowReport recovered;
  run_flow(start, form, p, recovered);
  CHECK(recovered.rejections > 0);
  CHECK(recovered.status != FlowStatus::Aborted);
  CHECK(recovered.energy_monotone);
  CHECK(recovered.history.back().tau < p.tau);

  p.max_rejections = 0;
  FlowReport aborted;
  run_flow(start, form, p, aborted);
  CHECK(aborted.status == FlowStatus::Aborted);
  CHECK_FALSE(aborted.message.empty());
  CHECK_FALSE(aborted.history.empty());
}

TEST_CASE("warnings") {
  PhaseFieldParams p;
  p.max_steps = 1;
  {
    const QuadraticForm form = small_form(2);
    PhaseState off = state_of(form, 0.0, 0.1);
    FlowReport report;
    const PhaseState end = run_flow(off, form, p, report);
    CHECK(report.warnings.size() == 2);  // unresolved epsilon, projected start
    CHECK(constraint_residuals(end, form, p).max() <= 1e-10);
  }
  {
    const QuadraticForm form = small_form(4);
    FlowReport report;
    run_flow(noisy_initial_state(form, p, 7), form, p, report);
    CHECK(report.warnings.empty());
  }
}

TEST_CASE("flow CSV header") {
  const QuadraticForm form = small_form();
  PhaseFieldParams p;
  p.max_steps = 3;
  FlowReport report;
  run_flow(noisy_initial_state(form, p, 7), form, p, report);
  write_flow_csv("flow_test.csv", report);
  std::ifstream in("flow_test.csv");
  std::string header;
  std::getline(in, header);
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  in.close();
  std::remove("flow_test.csv");
  CHECK(header.find("energy [energy]") != std::string::npos);
  CHECK(header.find("t [time]") != std::string::npos);
  CHECK(rows == static_cast<int>(report.history.size()));
}
