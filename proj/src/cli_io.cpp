#include "memfem/cli_io.hpp"

#include "memfem/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#ifndef MEMFEM_VERSION
#define MEMFEM_VERSION "unknown"
#endif

namespace memfem {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": '" + text + "' is not a number");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": '" + text + "' is not an integer");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

// shortest text that reads back to the same double
std::string shortest(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string join(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + shortest(values[i]);
  return s;
}

// One setter per accepted key; a key absent from this table is an error.
using Setter = void (*)(RunConfig&, const std::string& key, const std::string& value);

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"mesh",
       {
           {"R", [](RunConfig& c, const std::string& k, const std::string& v) { c.mesh.R = parse_double(k, v); }},
           {"level", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.mesh.level = static_cast<int>(parse_integer(k, v));
            }},
           {"family", [](RunConfig& c, const std::string&, const std::string& v) { c.mesh.family = trim(v); }},
           {"sides", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.mesh.sides = static_cast<int>(parse_integer(k, v));
            }},
       }},
      {"model",
       {
           {"kappa", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.kappa = parse_double(k, v); }},
           {"sigma", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.sigma = parse_double(k, v); }},
       }},
      {"points",
       {
           {"configuration",
            [](RunConfig& c, const std::string&, const std::string& v) { c.points.configuration = trim(v); }},
           {"delta", [](RunConfig& c, const std::string& k, const std::string& v) { c.points.delta = parse_double(k, v); }},
           {"height",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.points.height = parse_double(k, v); }},
           {"count", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.points.count = static_cast<int>(parse_integer(k, v));
            }},
           {"ring_angle",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.points.ring_angle = parse_double(k, v); }},
           {"pose", [](RunConfig& c, const std::string& k, const std::string& v) {
              const auto q = parse_list(k, v);
              if (q.size() != 6) throw ConfigError(k + ": expected 6 numbers (3 angles, 3 shifts)");
              std::copy(q.begin(), q.end(), c.points.pose.begin());
            }},
           {"deltas", [](RunConfig& c, const std::string& k, const std::string& v) { c.points.deltas = parse_list(k, v); }},
           {"point_deltas", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.points.point_deltas = parse_list(k, v);
            }},
       }},
      {"phase",
       {
           {"epsilon",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.epsilon = parse_double(k, v); }},
           {"b", [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.b = parse_double(k, v); }},
           {"lambda",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.Lambda = parse_double(k, v); }},
           {"alpha",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.alpha = parse_double(k, v); }},
           {"alpha1",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.alpha1 = parse_double(k, v); }},
           {"alpha2",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.alpha2 = parse_double(k, v); }},
           {"tau", [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.tau = parse_double(k, v); }},
           {"t_end",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.t_end = parse_double(k, v); }},
           {"stat_tol",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.params.stat_tol = parse_double(k, v); }},
           {"stabilization", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.phase.params.stabilization = parse_double(k, v);
            }},
           {"max_steps", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.phase.params.max_steps = static_cast<int>(parse_integer(k, v));
            }},
           {"noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.noise = parse_double(k, v); }},
           {"lambdas", [](RunConfig& c, const std::string& k, const std::string& v) { c.phase.lambdas = parse_list(k, v); }},
       }},
      {"taylor",
       {
           {"mu", [](RunConfig& c, const std::string& k, const std::string& v) { c.taylor.mu = parse_double(k, v); }},
           {"rho", [](RunConfig& c, const std::string& k, const std::string& v) { c.taylor.rho = parse_list(k, v); }},
       }},
      {"output",
       {
           {"dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output.dir = trim(v); }},
           {"stride", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.output.stride = static_cast<int>(parse_integer(k, v));
            }},
           {"rho", [](RunConfig& c, const std::string& k, const std::string& v) { c.output.rho = parse_double(k, v); }},
       }},
      {"run",
       {
           {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
              const long long s = parse_integer(k, v);
              if (s < 0) throw ConfigError(k + ": seed must be nonnegative");
              c.seed = static_cast<std::uint64_t>(s);
            }},
           {"threads", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.threads = static_cast<int>(parse_integer(k, v));
            }},
       }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (model.R != mesh.R) throw ParameterError("model radius and mesh radius differ");
  if (mesh.family != "icosphere" && mesh.family != "bipyramid")
    throw ParameterError("mesh family must be icosphere or bipyramid, got '" + mesh.family + "'");
  if (mesh.level < 0 || mesh.level > kMaxRefinementLevel)
    throw ParameterError("mesh level must lie in [0, " + std::to_string(kMaxRefinementLevel) + "]");
  if (mesh.family == "bipyramid" && mesh.sides < 3) throw ParameterError("bipyramid needs at least 3 sides");
  if (points.configuration != "icosahedron" && points.configuration != "equator" &&
      points.configuration != "polar-rings")
    throw ParameterError("points configuration must be icosahedron, equator or polar-rings");
  if (!(points.delta > 0.0)) throw ParameterError("penalty delta must be positive");
  if (points.count < 1) throw ParameterError("point count must be positive");
  for (double d : points.deltas)
    if (!(d > 0.0)) throw ParameterError("penalty deltas must be positive");
  phase.params.validate();
  if (!(phase.noise >= 0.0)) throw ParameterError("noise amplitude must be nonnegative");
  if (taylor.rho.size() < 2) throw ParameterError("the Taylor check needs at least two rho values");
  for (double r : taylor.rho)
    if (!(r > 0.0)) throw ParameterError("Taylor rho values must be positive");
  if (output.stride < 1) throw ParameterError("output stride must be positive");
  if (threads < 1) throw ParameterError("threads must be at least 1");
}

std::string RunConfig::to_ini() const {
  const PhaseFieldParams& p = phase.params;
  auto d = [](double v) { return shortest(v); };
  std::ostringstream s;
  s << "[mesh]\nR = " << d(mesh.R) << "\nlevel = " << mesh.level << "\nfamily = " << mesh.family
    << "\nsides = " << mesh.sides << "\n\n";
  s << "[model]\nkappa = " << d(model.kappa) << "\nsigma = " << d(model.sigma) << "\n\n";
  s << "[points]\nconfiguration = " << points.configuration << "\ndelta = " << d(points.delta)
    << "\nheight = " << d(points.height) << "\ncount = " << points.count << "\nring_angle = " << d(points.ring_angle)
    << "\npose = " << join({points.pose.begin(), points.pose.end()}) << "\ndeltas = " << join(points.deltas);
  if (!points.point_deltas.empty()) s << "\npoint_deltas = " << join(points.point_deltas);
  s << "\n\n";
  s << "[phase]\nepsilon = " << d(p.epsilon) << "\nb = " << d(p.b) << "\nlambda = " << d(p.Lambda)
    << "\nalpha = " << d(p.alpha) << "\nalpha1 = " << d(p.alpha1) << "\nalpha2 = " << d(p.alpha2)
    << "\ntau = " << d(p.tau) << "\nt_end = " << d(p.t_end) << "\nstat_tol = " << d(p.stat_tol)
    << "\nstabilization = " << d(p.stabilization) << "\nmax_steps = " << p.max_steps << "\nnoise = " << d(phase.noise)
    << "\nlambdas = " << join(phase.lambdas) << "\n\n";
  s << "[taylor]\nmu = " << d(taylor.mu) << "\nrho = " << join(taylor.rho) << "\n\n";
  s << "[output]\ndir = " << output.dir.string() << "\nstride = " << output.stride << "\nrho = " << d(output.rho)
    << "\n\n";
  s << "[run]\nseed = " << seed << "\nthreads = " << threads << "\n";
  return s.str();
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  std::vector<std::string> unknown;
  std::vector<std::pair<Setter, std::pair<std::string, std::string>>> assignments;
  for (const auto& [section, body] : tree) {
    const auto known = schema().find(section);
    if (known == schema().end()) {
      // either an unknown section or a key outside any section
      unknown.push_back(body.empty() ? section : "[" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      const auto setter = known->second.find(key);
      if (setter == known->second.end()) {
        unknown.push_back(section + "." + key);
        continue;
      }
      assignments.push_back({setter->second, {section + "." + key, value.data()}});
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  for (const auto& [setter, kv] : assignments) setter(base, kv.first, kv.second);
  // one radius for geometry and model
  base.model.R = base.mesh.R;
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

TriangleMesh build_mesh(const MeshConfig& config) {
  if (config.family == "bipyramid") return build_bipyramid_sphere(config.R, config.sides, config.level);
  if (config.family == "icosphere") return build_icosphere(config.R, config.level);
  throw ParameterError("unknown mesh family '" + config.family + "'");
}

ConstraintSet build_constraints(const PointsConfig& config, double R) {
  std::vector<ParticleSpec> particles;
  if (config.configuration == "icosahedron") {
    particles.push_back(icosahedron_particle(R));
    for (double& z : particles.back().heights) z = config.height;
  } else if (config.configuration == "equator") {
    particles.push_back(equator_ring(R, config.count, config.height));
  } else if (config.configuration == "polar-rings") {
    particles = polar_ring_pair(R, config.count, config.ring_angle);
    for (auto& p : particles)
      for (double& z : p.heights) z *= config.height;
  } else {
    throw ParameterError("unknown points configuration '" + config.configuration + "'");
  }
  std::vector<ConstraintSet> groups;
  for (auto& p : particles) {
    p.pose.q = config.pose;
    groups.push_back(materialize(p, R));
  }
  ConstraintSet cs = merge(groups);
  cs.delta = config.delta;
  cs.point_deltas = config.point_deltas;
  validate(cs, R);
  return cs;
}

TriangleMesh displaced_surface(const TriangleMesh& sphere, const Vector& u, double rho) {
  if (u.size() != sphere.num_vertices()) throw ParameterError("displacement length does not match the mesh");
  TriangleMesh out = sphere;
  for (int i = 0; i < sphere.num_vertices(); ++i) {
    const Eigen::Vector3d x = sphere.vertex(i);
    out.vertices.row(i) = (x + rho * u[i] * x.normalized()).transpose();
  }
  out.radius_hint.reset();
  return out;
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream s;
  s << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  started_ = s.str();
}

void RunManifest::set_mesh(const TriangleMesh& mesh) { checksum_ = mesh_checksum(mesh); }

void RunManifest::finish(const std::string& name, std::chrono::steady_clock::time_point start,
                         const std::string& status, const std::string& message) {
  stages_.push_back({name, status,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), message});
}

bool RunManifest::failed() const {
  for (const auto& s : stages_)
    if (s.status != "ok") return true;
  return false;
}

void RunManifest::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << "command: " << command_ << "\n";
  out << "version: " << code_version() << "\n";
  out << "started: " << started_ << "\n";
  out << "wall_clock_s: " << std::fixed << std::setprecision(3)
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() << "\n";
  out << "mesh_checksum: ";
  if (checksum_) {
    out << std::hex << std::setw(16) << std::setfill('0') << *checksum_ << std::dec << std::setfill(' ') << "\n";
  } else {
    out << "none\n";
  }
  out << "status: " << (failed() ? "failed" : "ok") << "\n";
  out << "\n# stages\n";
  for (const auto& s : stages_) {
    out << s.name << ": " << s.status << " (" << std::setprecision(3) << s.seconds << " s)";
    if (!s.message.empty()) out << ": " << s.message;
    out << "\n";
  }
  if (!notes_.empty()) {
    out << "\n# notes\n";
    for (const auto& n : notes_) out << n << "\n";
  }
  out << "\n# config\n" << config_;
}

std::string code_version() { return MEMFEM_VERSION; }

}  // namespace memfem
