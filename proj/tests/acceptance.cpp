// One PASS/FAIL line per acceptance criterion, in order. Exit status 0 only
// if every criterion passes, including its time budget.

#include "memfem/validation.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

using namespace memfem;

namespace {

// seconds; criteria without an entry have no budget
const std::map<int, double> kTimeLimit{{1, 10.0}, {4, 120.0}, {5, 120.0}, {7, 600.0}, {8, 10.0}};

CheckResult with_budget(CheckResult r) {
  const auto limit = kTimeLimit.find(r.id);
  if (limit != kTimeLimit.end() && r.seconds > limit->second) {
    r.passed = false;
    std::ostringstream s;
    s << r.detail << "; over the time limit of " << limit->second << " s";
    r.detail = s.str();
  }
  return r;
}

}  // namespace

int main() {
  std::vector<CheckResult> results;
  auto report = [&](CheckResult r) {
    r = with_budget(std::move(r));
    std::cout << format_check(r) << std::endl;
    results.push_back(std::move(r));
  };

  report(check_sphere_geometry());
  report(check_spectrum());
  report(check_quadratic_form());
  report(check_taylor());
  report(check_penalty_convergence());
  report(check_hard_constraints());

  SweepSettings settings;
  const QuadraticForm form = assemble_a(build_icosphere(1.0, settings.level), ModelParams{});
  const std::vector<SweepRun> runs = lambda_sweep(form, settings);
  for (const SweepRun& run : runs)
    std::printf("  Lambda %+5.1f: %s after %zu steps, corr %+.4f, %.1f s\n", run.Lambda,
                to_string(run.report.status).c_str(), run.report.history.size() - 1, run.correlation, run.seconds);
  std::fflush(stdout);
  report(check_flow_sweep(runs, settings));
  report(check_gradient());
  report(check_multipliers(runs, form, settings));

  int failed = 0;
  for (const CheckResult& r : results) failed += r.passed ? 0 : 1;
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
