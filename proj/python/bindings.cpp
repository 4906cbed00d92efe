#include "memfem/cli_io.hpp"
#include "memfem/error.hpp"
#include "memfem/geometry_oracle.hpp"
#include "memfem/phase_field.hpp"
#include "memfem/point_constraints.hpp"
#include "memfem/quadratic_model.hpp"
#include "memfem/sphere_mesh.hpp"
#include "memfem/validation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace memfem;

namespace {

void bind_errors(py::module_& m) {
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<SizeLimitError>(m, "SizeLimitError", base.ptr());
  py::register_exception<TopologyError>(m, "TopologyError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  auto solver = py::register_exception<SolverError>(m, "SolverError", base.ptr());
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", solver.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
}

void bind_mesh(py::module_& m) {
  py::class_<TriangleMesh>(m, "TriangleMesh")
      .def(py::init<>())
      .def_readwrite("vertices", &TriangleMesh::vertices)
      .def_readwrite("triangles", &TriangleMesh::triangles)
      .def_readwrite("radius_hint", &TriangleMesh::radius_hint)
      .def_property_readonly("num_vertices", &TriangleMesh::num_vertices)
      .def_property_readonly("num_triangles", &TriangleMesh::num_triangles);

  py::class_<MeshStats>(m, "MeshStats")
      .def_readonly("num_vertices", &MeshStats::num_vertices)
      .def_readonly("num_triangles", &MeshStats::num_triangles)
      .def_readonly("num_edges", &MeshStats::num_edges)
      .def_readonly("h_max", &MeshStats::h_max)
      .def_readonly("total_area", &MeshStats::total_area)
      .def_readonly("enclosed_volume", &MeshStats::enclosed_volume)
      .def_property_readonly("euler_characteristic", &MeshStats::euler_characteristic);

  m.def("build_icosphere", &build_icosphere, py::arg("R"), py::arg("level"));
  m.def("build_bipyramid_sphere", &build_bipyramid_sphere, py::arg("R"), py::arg("sides"), py::arg("level"));
  m.def("check_closed_mesh", &check_closed_mesh);
  m.def("mesh_stats", &mesh_stats);
  m.def("mesh_checksum", &mesh_checksum);
}

void bind_model(py::module_& m) {
  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double kappa, double sigma, double R) { return ModelParams{kappa, sigma, R}; }),
           py::arg("kappa") = 1.0, py::arg("sigma") = 1.0, py::arg("R") = 1.0)
      .def_readwrite("kappa", &ModelParams::kappa)
      .def_readwrite("sigma", &ModelParams::sigma)
      .def_readwrite("R", &ModelParams::R)
      .def("lambda0", &ModelParams::lambda0);

  py::class_<SurfaceOperators>(m, "SurfaceOperators")
      .def_readonly("mass", &SurfaceOperators::mass)
      .def_readonly("stiffness", &SurfaceOperators::stiffness)
      .def_readonly("lumped", &SurfaceOperators::lumped)
      .def("area", &SurfaceOperators::area);

  py::class_<QuadraticForm>(m, "QuadraticForm")
      .def_readonly("mesh", &QuadraticForm::mesh)
      .def_readonly("params", &QuadraticForm::params)
      .def_readonly("ops", &QuadraticForm::ops)
      .def_readonly("A", &QuadraticForm::A)
      .def_readonly("constraints", &QuadraticForm::constraints)
      .def_readonly("kernel", &QuadraticForm::kernel)
      .def("evaluate", &QuadraticForm::evaluate)
      .def_property_readonly("size", &QuadraticForm::size);

  m.def("make_operators", &make_operators);
  m.def("discrete_h2_norm", &discrete_h2_norm);
  m.def("assemble_a", [](const TriangleMesh& mesh, const ModelParams& p) { return assemble_a(mesh, p); },
        py::arg("mesh"), py::arg("params") = ModelParams{});
  m.def("quadratic_lagrangian", &quadratic_lagrangian, py::arg("u"), py::arg("mu"), py::arg("form"));
  m.def("harmonic_rayleigh_quotient", &harmonic_rayleigh_quotient);
  m.def("zonal_degree2", &zonal_degree2);
}

void bind_oracle(py::module_& m) {
  py::class_<EnergyBreakdown>(m, "EnergyBreakdown")
      .def_readonly("willmore", &EnergyBreakdown::willmore)
      .def_readonly("area", &EnergyBreakdown::area)
      .def_readonly("volume", &EnergyBreakdown::volume)
      .def_readonly("helfrich", &EnergyBreakdown::helfrich)
      .def_readonly("lagrangian", &EnergyBreakdown::lagrangian);

  py::class_<TaylorReport>(m, "TaylorReport")
      .def_readonly("slope", &TaylorReport::slope)
      .def_readonly("discretization_floor", &TaylorReport::discretization_floor)
      .def_readonly("roundoff_floor", &TaylorReport::roundoff_floor)
      .def_property_readonly("status", [](const TaylorReport& r) { return to_string(r.status); })
      .def_property_readonly("residuals", [](const TaylorReport& r) {
        std::vector<double> out;
        for (const auto& row : r.rows) out.push_back(row.residual);
        return out;
      });

  m.def("perturb", [](const TriangleMesh& sphere, const Vector& u, double rho) { return perturb(sphere, u, rho).realized; });
  m.def("discrete_mean_curvature", &discrete_mean_curvature);
  m.def("energies", &energies, py::arg("mesh"), py::arg("params"), py::arg("lam"), py::arg("V0"));
  m.def("taylor_consistency", &taylor_consistency, py::arg("form"), py::arg("sphere"), py::arg("u"), py::arg("mu"),
        py::arg("rho"), py::arg("required_slope") = 2.7);
}

void bind_points(py::module_& m) {
  py::class_<ConstraintSet>(m, "ConstraintSet")
      .def(py::init<>())
      .def_readwrite("points", &ConstraintSet::points)
      .def_readwrite("targets", &ConstraintSet::targets)
      .def_readwrite("delta", &ConstraintSet::delta)
      .def_readwrite("point_deltas", &ConstraintSet::point_deltas)
      .def_property_readonly("size", &ConstraintSet::size);

  py::class_<ParticleSpec>(m, "ParticleSpec");

  py::class_<ConstraintSolution>(m, "ConstraintSolution")
      .def_readonly("u", &ConstraintSolution::u)
      .def_readonly("orthogonality_multipliers", &ConstraintSolution::orthogonality_multipliers)
      .def_readonly("point_multipliers", &ConstraintSolution::point_multipliers)
      .def_readonly("point_values", &ConstraintSolution::point_values)
      .def_readonly("bending_energy", &ConstraintSolution::bending_energy)
      .def_readonly("penalty_energy", &ConstraintSolution::penalty_energy);

  py::class_<ConvergenceStudy>(m, "ConvergenceStudy")
      .def_readonly("rate", &ConvergenceStudy::rate)
      .def_readonly("monotone", &ConvergenceStudy::monotone)
      .def_readonly("hard_energy", &ConvergenceStudy::hard_energy)
      .def_property_readonly("errors", [](const ConvergenceStudy& s) {
        std::vector<double> out;
        for (const auto& row : s.rows) out.push_back(row.h2_error);
        return out;
      });

  m.def("icosahedron_particle", &icosahedron_particle, py::arg("R") = 1.0);
  m.def("equator_ring", &equator_ring, py::arg("R"), py::arg("count"), py::arg("height") = 1.0);
  m.def("materialize", &materialize, py::arg("particle"), py::arg("R") = 1.0);
  m.def("solve_penalty", &solve_penalty);
  m.def("solve_hard", &solve_hard);
  m.def("convergence_study", &convergence_study, py::arg("form"), py::arg("constraints"), py::arg("deltas"),
        py::arg("threads") = 1);
}

void bind_phase(py::module_& m) {
  py::class_<PhaseFieldParams>(m, "PhaseFieldParams")
      .def(py::init<>())
      .def_readwrite("epsilon", &PhaseFieldParams::epsilon)
      .def_readwrite("b", &PhaseFieldParams::b)
      .def_readwrite("Lambda", &PhaseFieldParams::Lambda)
      .def_readwrite("alpha", &PhaseFieldParams::alpha)
      .def_readwrite("alpha1", &PhaseFieldParams::alpha1)
      .def_readwrite("alpha2", &PhaseFieldParams::alpha2)
      .def_readwrite("tau", &PhaseFieldParams::tau)
      .def_readwrite("t_end", &PhaseFieldParams::t_end)
      .def_readwrite("stat_tol", &PhaseFieldParams::stat_tol)
      .def_readwrite("max_steps", &PhaseFieldParams::max_steps)
      .def("validate", &PhaseFieldParams::validate);

  py::class_<PhaseState>(m, "PhaseState")
      .def(py::init<>())
      .def_readwrite("u", &PhaseState::u)
      .def_readwrite("phi", &PhaseState::phi)
      .def_readwrite("t", &PhaseState::t)
      .def_readonly("lambda_phi", &PhaseState::lambda_phi)
      .def_readonly("lambda_u", &PhaseState::lambda_u);

  py::class_<PhaseEnergy>(m, "PhaseEnergy")
      .def_readonly("bending", &PhaseEnergy::bending)
      .def_readonly("coupling", &PhaseEnergy::coupling)
      .def_readonly("gradient", &PhaseEnergy::gradient)
      .def_readonly("bulk", &PhaseEnergy::bulk)
      .def_readonly("total", &PhaseEnergy::total);

  py::class_<Multipliers>(m, "Multipliers")
      .def_readonly("lambda_phi", &Multipliers::lambda_phi)
      .def_readonly("lambda_u", &Multipliers::lambda_u);

  py::class_<FlowReport>(m, "FlowReport")
      .def_property_readonly("status", [](const FlowReport& r) { return to_string(r.status); })
      .def_readonly("energy_monotone", &FlowReport::energy_monotone)
      .def_readonly("max_constraint_residual", &FlowReport::max_constraint_residual)
      .def_readonly("warnings", &FlowReport::warnings)
      .def_property_readonly("steps", [](const FlowReport& r) { return static_cast<int>(r.history.size()) - 1; })
      .def_property_readonly("energies", [](const FlowReport& r) {
        std::vector<double> out;
        for (const auto& row : r.history) out.push_back(row.energy.total);
        return out;
      });

  m.def("energy_E", &energy_E);
  m.def("multipliers", &multipliers);
  m.def("noisy_initial_state", &noisy_initial_state, py::arg("form"), py::arg("params"), py::arg("seed"),
        py::arg("amplitude") = 0.01);
  m.def("flow_step", [](const PhaseState& s, const QuadraticForm& form, const PhaseFieldParams& p) {
    const StepResult r = flow_step(s, form, p);
    return py::make_tuple(r.state, r.accepted);
  });
  m.def(
      "run_flow",
      [](const PhaseState& initial, const QuadraticForm& form, const PhaseFieldParams& p) {
        FlowReport report;
        PhaseState end;
        {
          py::gil_scoped_release release;
          end = run_flow(initial, form, p, report);
        }
        return py::make_tuple(end, report);
      },
      "Returns (final state, report).");
  m.def("phase_correlation", &phase_correlation);
}

}  // namespace

PYBIND11_MODULE(memfem, m) {
  m.doc() = "Finite elements for small deformations of spherical membranes.";
  m.attr("__version__") = code_version();
  bind_errors(m);
  bind_mesh(m);
  bind_model(m);
  bind_oracle(m);
  bind_points(m);
  bind_phase(m);
}
