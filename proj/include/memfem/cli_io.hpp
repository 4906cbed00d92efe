#pragma once

#include "memfem/phase_field.hpp"
#include "memfem/point_constraints.hpp"
#include "memfem/quadratic_model.hpp"
#include "memfem/sphere_mesh.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace memfem {

struct MeshConfig {
  double R = 1.0;
  int level = 4;
  std::string family = "icosphere";  // or "bipyramid"
  int sides = 10;                    // bipyramid only
};

/// Which attachment configuration to build.
struct PointsConfig {
  std::string configuration = "icosahedron";  // icosahedron | equator | polar-rings
  double delta = 1e-4;
  double height = 1.0;
  int count = 10;          // equator ring size, or points per polar ring
  double ring_angle = 0.5; // polar rings, radians from the pole
  std::array<double, 6> pose{};
  std::vector<double> deltas{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::vector<double> point_deltas;  // per-point overrides of delta
};

struct PhaseConfig {
  PhaseFieldParams params;
  double noise = 0.01;
  std::vector<double> lambdas{-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0};
};

struct TaylorConfig {
  double mu = 0.5;
  std::vector<double> rho{0.1, 0.05, 0.025, 0.0125};
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  int stride = 1000;  // steps between VTK snapshots of a flow
  /// Amplitude of the displaced surface written for viewing. Never enters a
  /// solve.
  double rho = 1.0;
};

/// Everything a run needs. Read from key = value files with [sections];
/// command-line options override file values.
struct RunConfig {
  std::string subcommand;
  MeshConfig mesh;
  ModelParams model;
  PointsConfig points;
  PhaseConfig phase;
  TaylorConfig taylor;
  OutputConfig output;
  std::uint64_t seed = 7;
  int threads = 1;

  /// Throws ParameterError on the first invalid value.
  void validate() const;

  /// Canonical key = value text; parsing it gives back the same config.
  std::string to_ini() const;
};

/// Throws ConfigError naming every unknown section or key, and on values that
/// do not parse.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

TriangleMesh build_mesh(const MeshConfig& config);

/// The attachment configuration materialized on the sphere of radius R.
ConstraintSet build_constraints(const PointsConfig& config, double R);

/// x + rho u nu at every vertex, for viewing only (may self-intersect).
TriangleMesh displaced_surface(const TriangleMesh& sphere, const Vector& u, double rho);

/// Plain-text record of a run: config echo, code version, mesh checksum,
/// wall-clock and the status of each stage.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(const RunConfig& config) { config_ = config.to_ini(); }
  void set_mesh(const TriangleMesh& mesh);
  void note(const std::string& line) { notes_.push_back(line); }

  /// Runs `body` as a named stage and records ok or the error message. The
  /// exception is rethrown.
  template <class F>
  auto stage(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        finish(name, start, "ok", "");
      } else {
        auto result = body();
        finish(name, start, "ok", "");
        return result;
      }
    } catch (const std::exception& e) {
      finish(name, start, "failed", e.what());
      throw;
    }
  }

  bool failed() const;
  void write(const std::filesystem::path& path) const;

 private:
  struct Stage {
    std::string name;
    std::string status;
    double seconds = 0.0;
    std::string message;
  };

  void finish(const std::string& name, std::chrono::steady_clock::time_point start, const std::string& status,
              const std::string& message);

  std::string command_;
  std::string started_;
  std::chrono::steady_clock::time_point start_;
  std::string config_;
  std::optional<std::uint64_t> checksum_;
  std::vector<Stage> stages_;
  std::vector<std::string> notes_;
};

/// Version string of the library build.
std::string code_version();

}  // namespace memfem
