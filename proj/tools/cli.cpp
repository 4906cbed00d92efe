#include "cli.hpp"

#include "memfem/cli_io.hpp"
#include "memfem/error.hpp"
#include "memfem/geometry_oracle.hpp"
#include "memfem/validation.hpp"
#include "memfem/vtk_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace memfem {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<double> R;
  std::optional<int> level;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> family;
  std::optional<int> sides;
  std::optional<double> delta;
  std::optional<double> lambda;
  std::optional<double> mu;
  bool skip_flow = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "key = value config file with [sections]")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (a file for the mesh command)");
  cmd->add_option("--R", o.R, "sphere radius");
  cmd->add_option("--level", o.level, "mesh refinement level");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--threads", o.threads, "worker threads; 1 is deterministic");
}

RunConfig make_config(const std::string& subcommand, const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  c.subcommand = subcommand;
  if (o.out) c.output.dir = *o.out;
  if (o.R) c.mesh.R = c.model.R = *o.R;
  if (o.level) c.mesh.level = *o.level;
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.family) c.mesh.family = *o.family;
  if (o.sides) c.mesh.sides = *o.sides;
  if (o.delta) c.points.delta = *o.delta;
  if (o.lambda) c.phase.params.Lambda = *o.lambda;
  if (o.mu) c.taylor.mu = *o.mu;
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::ostringstream report_stream() {
  std::ostringstream s;
  s << std::setprecision(10);
  return s;
}

std::string lambda_tag(double Lambda) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+g", Lambda);
  return buf;
}

struct Prepared {
  TriangleMesh mesh;
  QuadraticForm form;
};

Prepared prepare(const RunConfig& cfg, RunManifest& manifest) {
  Prepared p;
  p.mesh = manifest.stage("mesh", [&] {
    TriangleMesh m = build_mesh(cfg.mesh);
    check_closed_mesh(m);
    return m;
  });
  manifest.set_mesh(p.mesh);
  p.form = manifest.stage("assemble", [&] { return assemble_a(p.mesh, cfg.model); });
  return p;
}

void describe_mesh(std::ostream& s, const RunConfig& cfg, const TriangleMesh& mesh) {
  const MeshStats st = mesh_stats(mesh);
  s << "mesh: " << cfg.mesh.family << " level " << cfg.mesh.level << ", R " << cfg.mesh.R << ", "
    << st.num_vertices << " vertices, " << st.num_triangles << " triangles, h_max " << st.h_max << "\n";
}

int cmd_mesh(const RunConfig& cfg, RunManifest& manifest, const fs::path& out) {
  const TriangleMesh mesh = manifest.stage("mesh", [&] {
    TriangleMesh m = build_mesh(cfg.mesh);
    check_closed_mesh(m);
    return m;
  });
  manifest.set_mesh(mesh);
  manifest.stage("write", [&] {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_vtk(out, mesh, {}, "memfem sphere mesh");
  });
  const MeshStats st = mesh_stats(mesh);
  std::cout << "wrote " << out.string() << ": " << st.num_vertices << " points, " << st.num_triangles
            << " triangles, area " << std::setprecision(10) << st.total_area << ", volume " << st.enclosed_volume
            << ", h_max " << st.h_max << "\n";
  return 0;
}

int cmd_points(const RunConfig& cfg, RunManifest& manifest, bool hard) {
  const Prepared p = prepare(cfg, manifest);
  ConstraintSet cs = manifest.stage("constraints", [&] { return build_constraints(cfg.points, cfg.mesh.R); });
  const auto warnings = wellposedness_warnings(cs, cfg.mesh.R);
  for (const auto& w : warnings) {
    std::cerr << "warning: " << w << "\n";
    manifest.note("warning: " + w);
  }
  const ConstraintSolution sol =
      manifest.stage("solve", [&] { return hard ? solve_hard(p.form, cs) : solve_penalty(p.form, cs); });

  manifest.stage("write", [&] {
    const fs::path dir = cfg.output.dir;
    write_vtk(dir / "solution.vtk", p.mesh, {{"u", sol.u}}, "memfem point-constrained deformation");
    write_vtk(dir / "surface.vtk", displaced_surface(p.mesh, sol.u, cfg.output.rho), {{"u", sol.u}},
              "memfem displaced surface, rho " + std::to_string(cfg.output.rho));

    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "index [-],x [length],y [length],z [length],target [length],value [length],residual [length],"
           "reaction [energy/length]\n";
    for (int j = 0; j < cs.size(); ++j) {
      const auto& x = cs.points[static_cast<std::size_t>(j)];
      const double reaction = hard ? sol.point_multipliers[j] : sol.point_residuals[j] / cs.delta_at(j);
      csv << j << "," << x[0] << "," << x[1] << "," << x[2] << "," << cs.targets[static_cast<std::size_t>(j)] << ","
          << sol.point_values[j] << "," << sol.point_residuals[j] << "," << reaction << "\n";
    }
    write_text(dir / "points.csv", csv.str());

    auto s = report_stream();
    s << (hard ? "hard" : "penalty") << " point constraints, configuration " << cfg.points.configuration << ", "
      << cs.size() << " points\n";
    describe_mesh(s, cfg, p.mesh);
    s << "kappa " << cfg.model.kappa << ", sigma " << cfg.model.sigma << "\n";
    if (!hard) s << "delta " << cs.delta << "\n";
    s << "bending energy 1/2 a(u,u): " << sol.bending_energy << "\n";
    if (!hard) s << "penalty energy: " << sol.penalty_energy << "\n";
    s << "max |u(p_j) - Z_j|: " << sol.point_residuals.cwiseAbs().maxCoeff() << "\n";
    s << "orthogonality residual: " << sol.constraint_residual << "\n";
    s << "orthogonality multipliers:";
    for (int i = 0; i < 4; ++i) s << " " << sol.orthogonality_multipliers[i];
    s << "\nmax |u|: " << sol.u.cwiseAbs().maxCoeff() << "\n";
    s << "surface.vtk displaced with rho " << cfg.output.rho << " (viewing only)\n";
    for (const auto& w : warnings) s << "warning: " << w << "\n";
    write_text(dir / "report.txt", s.str());
    std::cout << s.str();
  });
  return 0;
}

int cmd_penalty_study(const RunConfig& cfg, RunManifest& manifest) {
  const Prepared p = prepare(cfg, manifest);
  const ConstraintSet cs = manifest.stage("constraints", [&] { return build_constraints(cfg.points, cfg.mesh.R); });
  const ConvergenceStudy study =
      manifest.stage("study", [&] { return convergence_study(p.form, cs, cfg.points.deltas, cfg.threads); });
  manifest.stage("write", [&] {
    const fs::path dir = cfg.output.dir;
    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "delta [length^2/energy],h2_error [length],max_point_residual [length],total_energy [energy]\n";
    for (const auto& r : study.rows)
      csv << r.delta << "," << r.h2_error << "," << r.max_point_residual << "," << r.total_energy << "\n";
    write_text(dir / "study.csv", csv.str());

    auto s = report_stream();
    s << "penalty convergence study, configuration " << cfg.points.configuration << "\n";
    describe_mesh(s, cfg, p.mesh);
    s << "hard-constraint bending energy: " << study.hard_energy << "\n";
    s << "fitted rate of the H2 error in delta: " << study.rate << " (expected at least 0.5)\n";
    s << "errors monotone in delta: " << (study.monotone ? "yes" : "no") << "\n";
    write_text(dir / "report.txt", s.str());
    std::cout << s.str();
  });
  return 0;
}

int cmd_taylor(const RunConfig& cfg, RunManifest& manifest) {
  const Prepared p = prepare(cfg, manifest);
  const TaylorReport rep = manifest.stage("taylor", [&] {
    return taylor_consistency(p.form, p.mesh, zonal_degree2(p.mesh), cfg.taylor.mu, cfg.taylor.rho);
  });
  manifest.stage("write", [&] {
    const fs::path dir = cfg.output.dir;
    write_taylor_csv((dir / "taylor.csv").string(), rep);
    auto s = report_stream();
    s << "Taylor consistency of the quadratic form, u = 3 z^2 / R^2 - 1, mu " << cfg.taylor.mu << "\n";
    describe_mesh(s, cfg, p.mesh);
    s << "L(Gamma_0): " << rep.base_lagrangian << "\nL(u, mu): " << rep.quadratic_lagrangian << "\n";
    s << "slope: " << rep.slope << " (required " << rep.required_slope << ")\n";
    s << "quadratic mismatch e2: " << rep.quadratic_mismatch << ", cubic coefficient " << rep.cubic_coefficient
      << "\n";
    s << "discretization floor: " << rep.discretization_floor << ", roundoff floor " << rep.roundoff_floor << "\n";
    s << "status: " << to_string(rep.status) << "\n";
    write_text(dir / "report.txt", s.str());
    std::cout << s.str();
  });
  return rep.status == TaylorStatus::Fail ? 1 : 0;
}

void describe_flow(std::ostream& s, const FlowReport& rep, const PhaseState& state, const QuadraticForm& form,
                   const PhaseFieldParams& params) {
  const Multipliers closed = multipliers(state, form, params);
  const PhaseEnergy e = energy_E(state, form, params);
  s << "status: " << to_string(rep.status) << " after " << static_cast<int>(rep.history.size()) - 1
    << " steps, t = " << state.t << ", rejections " << rep.rejections << "\n";
  if (!rep.message.empty()) s << "message: " << rep.message << "\n";
  s << "energy: total " << e.total << ", bending " << e.bending << ", coupling " << e.coupling << ", gradient "
    << e.gradient << ", bulk " << e.bulk << "\n";
  s << "energy monotone: " << (rep.energy_monotone ? "yes" : "no")
    << ", max constraint residual: " << rep.max_constraint_residual << "\n";
  s << "lambda_phi: " << state.lambda_phi << " (closed form " << closed.lambda_phi << ")\n";
  s << "lambda_u: " << state.lambda_u << " (closed form " << closed.lambda_u << ")\n";
  s << "corr(u, phi - alpha): " << phase_correlation(state, form, params) << "\n";
  s << "max |u|: " << state.u.cwiseAbs().maxCoeff() << ", phi in [" << state.phi.minCoeff() << ", "
    << state.phi.maxCoeff() << "]\n";
  for (const auto& w : rep.warnings) s << "warning: " << w << "\n";
}

int cmd_phase_flow(const RunConfig& cfg, RunManifest& manifest) {
  const Prepared p = prepare(cfg, manifest);
  const PhaseFieldParams& params = cfg.phase.params;
  const fs::path dir = cfg.output.dir;
  const PhaseState initial = noisy_initial_state(p.form, params, cfg.seed, cfg.phase.noise);
  FlowReport rep;
  const PhaseState final_state = manifest.stage("flow", [&] {
    return run_flow(initial, p.form, params, rep, [&](int step, const PhaseState& s) {
      if (step % cfg.output.stride != 0) return;
      char name[64];
      std::snprintf(name, sizeof name, "flow_%07d.vtk", step);
      write_vtk(dir / name, p.mesh, {{"u", s.u}, {"phi", s.phi}}, "memfem flow t=" + std::to_string(s.t));
    });
  });
  for (const auto& w : rep.warnings) manifest.note("warning: " + w);
  manifest.stage("write", [&] {
    write_flow_csv((dir / "flow.csv").string(), rep);
    write_vtk(dir / "final.vtk", p.mesh, {{"u", final_state.u}, {"phi", final_state.phi}}, "memfem final state");
    write_vtk(dir / "surface.vtk", displaced_surface(p.mesh, final_state.u, cfg.output.rho),
              {{"u", final_state.u}, {"phi", final_state.phi}}, "memfem displaced surface");
    auto s = report_stream();
    s << "phase-field flow, Lambda " << params.Lambda << ", epsilon " << params.epsilon << ", b " << params.b
      << ", alpha " << params.alpha << ", tau " << params.tau << ", seed " << cfg.seed << "\n";
    describe_mesh(s, cfg, p.mesh);
    describe_flow(s, rep, final_state, p.form, params);
    write_text(dir / "report.txt", s.str());
    std::cout << s.str();
  });
  return rep.status == FlowStatus::Aborted ? 1 : 0;
}

int cmd_lambda_sweep(const RunConfig& cfg, RunManifest& manifest) {
  const Prepared p = prepare(cfg, manifest);
  SweepSettings settings;
  settings.level = cfg.mesh.level;
  settings.params = cfg.phase.params;
  settings.lambdas = cfg.phase.lambdas;
  settings.seed = cfg.seed;
  settings.noise = cfg.phase.noise;
  settings.threads = cfg.threads;
  const auto runs = manifest.stage("sweep", [&] { return lambda_sweep(p.form, settings); });
  bool aborted = false;
  manifest.stage("write", [&] {
    const fs::path dir = cfg.output.dir;
    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "lambda [1/length],status [-],steps [-],t [time],energy [energy],correlation [-],max_abs_u [length],"
           "lambda_phi [energy/area],lambda_phi_closed [energy/area],lambda_u [energy/area],"
           "lambda_u_closed [energy/area]\n";
    auto s = report_stream();
    s << "Lambda sweep, epsilon " << settings.params.epsilon << ", b " << settings.params.b << ", alpha "
      << settings.params.alpha << ", tau " << settings.params.tau << ", seed " << cfg.seed << "\n";
    describe_mesh(s, cfg, p.mesh);
    for (const auto& run : runs) {
      PhaseFieldParams params = settings.params;
      params.Lambda = run.Lambda;
      const Multipliers closed = multipliers(run.final_state, p.form, params);
      const std::string tag = lambda_tag(run.Lambda);
      write_flow_csv((dir / ("flow_lambda" + tag + ".csv")).string(), run.report);
      write_vtk(dir / ("final_lambda" + tag + ".vtk"), p.mesh, {{"u", run.final_state.u}, {"phi", run.final_state.phi}},
                "memfem final state, Lambda " + tag);
      csv << run.Lambda << "," << to_string(run.report.status) << "," << run.report.history.size() - 1 << ","
          << run.final_state.t << "," << run.report.history.back().energy.total << "," << run.correlation << ","
          << run.final_state.u.cwiseAbs().maxCoeff() << "," << run.final_state.lambda_phi << ","
          << closed.lambda_phi << "," << run.final_state.lambda_u << "," << closed.lambda_u << "\n";
      s << "\n# Lambda " << run.Lambda << "\n";
      describe_flow(s, run.report, run.final_state, p.form, params);
      aborted = aborted || run.report.status == FlowStatus::Aborted;
    }
    write_text(dir / "sweep.csv", csv.str());
    write_text(dir / "report.txt", s.str());
    std::cout << s.str();
  });
  return aborted ? 1 : 0;
}

int cmd_validate(const RunConfig& cfg, RunManifest& manifest, bool skip_flow) {
  const int level = cfg.mesh.level;
  if (level < 3) throw ParameterError("validate needs level >= 3");
  // tolerances quoted at level 5 grow like h^2 on coarser meshes
  const double coarsening = std::pow(4.0, std::max(0, 5 - level));
  std::vector<CheckResult> results;
  std::ostringstream lines;
  auto record = [&](const std::string& name, const std::function<CheckResult()>& check) {
    CheckResult r = manifest.stage(name, check);
    const std::string line = format_check(r);
    std::cout << line << std::endl;
    lines << line << "\n";
    results.push_back(std::move(r));
  };

  record("sphere geometry", [&] { return check_sphere_geometry(level, 3e-3 * coarsening); });
  record("spectrum", [&] { return check_spectrum(level, 2e-2 * coarsening); });
  record("quadratic form", [&] { return check_quadratic_form(level - 2, level); });
  record("taylor", [&] { return check_taylor(level); });
  record("penalty convergence", [&] { return check_penalty_convergence(level, cfg.threads); });
  record("hard constraints", [&] { return check_hard_constraints(level); });
  if (!skip_flow) {
    SweepSettings settings;
    settings.level = level;
    settings.params = cfg.phase.params;
    settings.lambdas = cfg.phase.lambdas;
    settings.seed = cfg.seed;
    settings.noise = cfg.phase.noise;
    settings.threads = cfg.threads;
    const QuadraticForm form = assemble_a(build_icosphere(cfg.mesh.R, level), cfg.model);
    std::vector<SweepRun> runs;
    record("flow sweep", [&] {
      runs = lambda_sweep(form, settings);
      return check_flow_sweep(runs, settings);
    });
    record("gradient", [&] { return check_gradient(2); });
    record("multipliers", [&] { return check_multipliers(runs, form, settings); });
  } else {
    record("gradient", [&] { return check_gradient(2); });
  }

  bool all = true;
  for (const auto& r : results) all = all && r.passed;
  lines << (all ? "all checks passed" : "some checks failed") << "\n";
  write_text(fs::path(cfg.output.dir) / "validation.txt", lines.str());
  return all ? 0 : 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Small deformations of spherical membranes: meshes, point constraints, phase-field flows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  Options opt;
  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"mesh", "write a sphere mesh as VTK"},
      {"validate", "run the invariant suite"},
      {"points-penalty", "point attachments by penalty"},
      {"points-hard", "point attachments as exact constraints"},
      {"penalty-study", "penalty solutions against the hard solution over a range of delta"},
      {"taylor-check", "second-order Taylor residual of the Lagrangian"},
      {"phase-flow", "one conserved gradient flow of the coupled phase field"},
      {"lambda-sweep", "flows over a list of coupling coefficients"},
  };
  std::map<std::string, CLI::App*> sub;
  for (const auto& c : commands) {
    CLI::App* cmd = app.add_subcommand(c.name, c.help);
    add_common(cmd, opt);
    sub[c.name] = cmd;
  }
  sub["mesh"]->add_option("--family", opt.family, "icosphere or bipyramid");
  sub["mesh"]->add_option("--sides", opt.sides, "bipyramid sides");
  sub["points-penalty"]->add_option("--delta", opt.delta, "penalty parameter");
  sub["phase-flow"]->add_option("--lambda", opt.lambda, "coupling coefficient Lambda");
  sub["taylor-check"]->add_option("--mu", opt.mu, "volume multiplier perturbation");
  sub["validate"]->add_flag("--skip-flow", opt.skip_flow, "skip the phase-field sweep and multiplier checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string name;
  for (const auto& [key, cmd] : sub)
    if (cmd->parsed()) name = key;

  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);
  RunManifest manifest(command_line);

  // where the manifest goes even if the config never parses
  const bool file_output = name == "mesh";
  fs::path out = opt.out ? fs::path(*opt.out) : fs::path(file_output ? "mesh.vtk" : "out");
  if (name == "validate" && !opt.level && opt.config.empty()) opt.level = 5;

  int code = 0;
  try {
    const RunConfig cfg = manifest.stage("config", [&] {
      RunConfig c = make_config(name, opt);
      if (!file_output) out = c.output.dir;
      c.validate();
      return c;
    });
    manifest.set_config(cfg);
    if (!file_output) fs::create_directories(out);

    if (name == "mesh") code = cmd_mesh(cfg, manifest, out);
    else if (name == "validate") code = cmd_validate(cfg, manifest, opt.skip_flow);
    else if (name == "points-penalty") code = cmd_points(cfg, manifest, false);
    else if (name == "points-hard") code = cmd_points(cfg, manifest, true);
    else if (name == "penalty-study") code = cmd_penalty_study(cfg, manifest);
    else if (name == "taylor-check") code = cmd_taylor(cfg, manifest);
    else if (name == "phase-flow") code = cmd_phase_flow(cfg, manifest);
    else if (name == "lambda-sweep") code = cmd_lambda_sweep(cfg, manifest);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    code = 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = 1;
  }

  if (code != 0) manifest.note("exit code " + std::to_string(code));
  try {
    const fs::path manifest_path =
        file_output ? fs::path(out).replace_extension(".manifest.txt") : out / "manifest.txt";
    manifest.write(manifest_path);
  } catch (const std::exception& e) {
    std::cerr << "error: manifest not written: " << e.what() << "\n";
    if (code == 0) code = 1;
  }
  return code;
}

}  // namespace memfem
