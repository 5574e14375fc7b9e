#pragma once

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "field_io.hpp"
#include "phantom.hpp"

namespace cgolab {

struct FluidSpec {
  std::string phantom = "gaussian-bump";  // constant | gaussian-bump | tanh-interface | random-bumps | files
  double absorption = 0.1;
  double zeta = 0.5;
  // constant
  double c = 1.0, rho = 1.0, alpha0 = 0.0;
  Vec3 v{0.0, 0.0, 0.0};
  // tanh-interface
  double z0 = 0.5, width = 0.05, flow_jump = 0.2;
  // random-bumps
  int bumps = 3;
  // files (resolved against the scenario directory)
  std::string c_file, v_file, rho_file, alpha0_file, zeta_file;
};

struct Scenario {
  std::string path;  // empty for scenarios built in code
  std::string source;  // raw text, hashed into manifests
  DomainSpec domain = unit_cube(13);
  FluidSpec fluid;
  std::vector<double> frequencies{0.5, 2.0};
  double gauge_amplitude = 0.2;     // boundary-flat sin^4 gauge for pair scenarios
  double perturbation = 0.0;        // non-gradient difference added to the second operator
  double density_factor = 2.5;      // constant planted between measured and reference density
  std::vector<double> h_ladder{0.4, 0.2, 0.1};
  std::vector<double> lambda_ladder{0.2, 0.1, 0.05};
  double xi_max = 2.0 * std::numbers::pi;
  Vec3 cgo_xi{4.0, 0.0, 0.0};
  std::vector<std::array<int, 2>> probe_faces{{2, 0}, {0, 1}};
  std::string mode = "oracle";  // oracle | dtn
  std::string output = "out";
  std::uint64_t seed = 1;

  void validate() const;
};

namespace detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.is_null()) return "scenario: ";
  return "scenario:" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

inline void check_keys(const YAML::Node& map, const std::string& section, const std::set<std::string>& allowed) {
  if (!map.IsMap()) throw ValidationError(where(map) + "'" + section + "' must be a mapping");
  for (auto it = map.begin(); it != map.end(); ++it) {
    auto key = it->first.as<std::string>();
    if (!allowed.count(key)) throw ValidationError(where(it->first) + "unknown key '" + key + "' in " + section);
  }
}

template <class T>
T get(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError(where(n) + "field '" + field + "' has the wrong type");
  }
}

template <class T>
void read(const YAML::Node& map, const std::string& key, T& out, const std::string& field) {
  if (auto n = map[key]) out = get<T>(n, field);
}

inline void read_vec3(const YAML::Node& map, const std::string& key, Vec3& out, const std::string& field) {
  auto n = map[key];
  if (!n) return;
  auto v = get<std::vector<double>>(n, field);
  if (v.size() != 3) throw ValidationError(where(n) + "field '" + field + "' needs 3 entries");
  out = {v[0], v[1], v[2]};
}

inline void check_ladder(const std::vector<double>& v, const std::string& field, std::size_t min_size,
                         const YAML::Node* node = nullptr) {
  std::string at = node ? where(*node) : "scenario: ";
  if (v.size() < min_size) throw ValidationError(at + "field '" + field + "' needs at least " + std::to_string(min_size) + " entries");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) throw ValidationError(at + "field '" + field + "' entries must be positive");
    if (i > 0 && !(v[i] < v[i - 1])) throw ValidationError(at + "field '" + field + "' must be strictly decreasing");
  }
}

}  // namespace detail

inline void Scenario::validate() const {
  domain.validate();
  detail::check_ladder(h_ladder, "h_ladder", 3);
  detail::check_ladder(lambda_ladder, "lambda_ladder", 2);
  for (double l : lambda_ladder)
    if (!(l < 1.0)) throw ValidationError("scenario: field 'lambda_ladder' entries must lie in (0, 1)");
  if (frequencies.size() < 2 || frequencies.size() > 3)
    throw ValidationError("scenario: field 'frequencies' needs 2 or 3 entries");
  if (!(xi_max > 0.0)) throw ValidationError("scenario: field 'xi_max' must be positive");
  if (mode != "oracle" && mode != "dtn") throw ValidationError("scenario: field 'mode' must be 'oracle' or 'dtn'");
  if (!(density_factor > 0.0)) throw ValidationError("scenario: field 'density_factor' must be positive");
  for (auto& f : probe_faces)
    if (f[0] < 0 || f[0] > 2 || (f[1] != 0 && f[1] != 1))
      throw ValidationError("scenario: field 'probe_faces' entries are [axis 0-2, side 0-1]");
  static const std::set<std::string> phantoms{"constant", "gaussian-bump", "tanh-interface", "random-bumps", "files"};
  if (!phantoms.count(fluid.phantom)) throw ValidationError("scenario: field 'fluid.phantom' is not a known phantom");
  if (fluid.phantom == "files") {
    for (const auto* f : {&fluid.c_file, &fluid.v_file, &fluid.rho_file, &fluid.alpha0_file, &fluid.zeta_file})
      if (f->empty() || !std::filesystem::exists(*f))
        throw ValidationError("scenario: fluid field file '" + *f + "' does not exist");
  }
}

inline Scenario parse_scenario(const std::string& text, const std::string& path = "") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError("scenario:" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
  }
  Scenario s;
  s.path = path;
  s.source = text;
  if (!root || root.IsNull()) {
    s.validate();
    return s;
  }
  using detail::read;
  detail::check_keys(root, "scenario",
                     {"domain", "fluid", "frequencies", "gauge_amplitude", "perturbation", "density_factor", "h_ladder",
                      "lambda_ladder", "xi_max", "cgo_xi", "probe_faces", "mode", "output", "seed"});
  if (auto d = root["domain"]) {
    detail::check_keys(d, "domain", {"lower", "upper", "nodes"});
    Vec3 lo = s.domain.lower, hi = s.domain.upper;
    detail::read_vec3(d, "lower", lo, "domain.lower");
    detail::read_vec3(d, "upper", hi, "domain.upper");
    std::array<int, 3> n = s.domain.n;
    if (auto nn = d["nodes"]) {
      if (nn.IsScalar()) {
        int k = detail::get<int>(nn, "domain.nodes");
        n = {k, k, k};
      } else {
        auto v = detail::get<std::vector<int>>(nn, "domain.nodes");
        if (v.size() != 3) throw ValidationError(detail::where(nn) + "field 'domain.nodes' needs 1 or 3 entries");
        n = {v[0], v[1], v[2]};
      }
    }
    try {
      s.domain = make_domain(lo, hi, n);
      s.domain.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(detail::where(d) + e.what());
    }
  }
  if (auto f = root["fluid"]) {
    detail::check_keys(f, "fluid",
                       {"phantom", "absorption", "zeta", "c", "v", "rho", "alpha0", "z0", "width", "flow_jump", "bumps",
                        "files"});
    auto& fl = s.fluid;
    read(f, "phantom", fl.phantom, "fluid.phantom");
    read(f, "absorption", fl.absorption, "fluid.absorption");
    read(f, "zeta", fl.zeta, "fluid.zeta");
    read(f, "c", fl.c, "fluid.c");
    detail::read_vec3(f, "v", fl.v, "fluid.v");
    read(f, "rho", fl.rho, "fluid.rho");
    read(f, "alpha0", fl.alpha0, "fluid.alpha0");
    read(f, "z0", fl.z0, "fluid.z0");
    read(f, "width", fl.width, "fluid.width");
    read(f, "flow_jump", fl.flow_jump, "fluid.flow_jump");
    read(f, "bumps", fl.bumps, "fluid.bumps");
    if (auto files = f["files"]) {
      detail::check_keys(files, "fluid.files", {"c", "v", "rho", "alpha0", "zeta"});
      auto base = path.empty() ? std::filesystem::path(".") : std::filesystem::path(path).parent_path();
      auto resolve = [&](const char* key, std::string& out) {
        if (auto n = files[key]) {
          std::filesystem::path p = detail::get<std::string>(n, std::string("fluid.files.") + key);
          out = (p.is_absolute() ? p : base / p).lexically_normal().string();
          if (!std::filesystem::exists(out))
            throw ValidationError(detail::where(n) + "fluid field file '" + out + "' does not exist");
        }
      };
      resolve("c", fl.c_file);
      resolve("v", fl.v_file);
      resolve("rho", fl.rho_file);
      resolve("alpha0", fl.alpha0_file);
      resolve("zeta", fl.zeta_file);
    }
    if (auto n = f["phantom"]; n && fl.phantom != "constant" && fl.phantom != "gaussian-bump" &&
                                   fl.phantom != "tanh-interface" && fl.phantom != "random-bumps" && fl.phantom != "files")
      throw ValidationError(detail::where(n) + "field 'fluid.phantom' is not a known phantom");
  }
  if (auto n = root["frequencies"]) {
    s.frequencies = detail::get<std::vector<double>>(n, "frequencies");
    if (s.frequencies.size() < 2 || s.frequencies.size() > 3)
      throw ValidationError(detail::where(n) + "field 'frequencies' needs 2 or 3 entries");
  }
  read(root, "gauge_amplitude", s.gauge_amplitude, "gauge_amplitude");
  read(root, "perturbation", s.perturbation, "perturbation");
  read(root, "density_factor", s.density_factor, "density_factor");
  if (auto n = root["h_ladder"]) {
    s.h_ladder = detail::get<std::vector<double>>(n, "h_ladder");
    detail::check_ladder(s.h_ladder, "h_ladder", 3, &n);
  }
  if (auto n = root["lambda_ladder"]) {
    s.lambda_ladder = detail::get<std::vector<double>>(n, "lambda_ladder");
    detail::check_ladder(s.lambda_ladder, "lambda_ladder", 2, &n);
  }
  read(root, "xi_max", s.xi_max, "xi_max");
  detail::read_vec3(root, "cgo_xi", s.cgo_xi, "cgo_xi");
  if (auto n = root["probe_faces"]) {
    s.probe_faces.clear();
    for (auto v : detail::get<std::vector<std::vector<int>>>(n, "probe_faces")) {
      if (v.size() != 2) throw ValidationError(detail::where(n) + "field 'probe_faces' entries are [axis, side]");
      s.probe_faces.push_back({v[0], v[1]});
    }
  }
  if (auto n = root["mode"]) {
    s.mode = detail::get<std::string>(n, "mode");
    if (s.mode != "oracle" && s.mode != "dtn") throw ValidationError(detail::where(n) + "field 'mode' must be 'oracle' or 'dtn'");
  }
  read(root, "output", s.output, "output");
  if (auto n = root["seed"]) s.seed = detail::get<std::uint64_t>(n, "seed");
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scenario " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str(), path);
}

inline FluidParameters build_fluid(const Scenario& s, const Grid& g) {
  const auto& f = s.fluid;
  FluidParameters p;
  if (f.phantom == "constant") {
    p = phantom::constant_fluid(g, f.c, f.v, f.rho, f.alpha0, f.zeta);
  } else if (f.phantom == "gaussian-bump") {
    p = phantom::smooth_fluid(g, f.absorption, f.zeta);
  } else if (f.phantom == "tanh-interface") {
    p = phantom::tanh_interface_fluid(g, f.z0, f.width);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double t = std::tanh((g.point(i)[2] - f.z0) / f.width);
      p.v.comp(0)[i] = 0.5 * f.flow_jump * (1.0 + t);
      p.zeta[i] = f.zeta;
      p.alpha0[i] = f.absorption;
    }
  } else if (f.phantom == "random-bumps") {
    p = phantom::smooth_fluid(g, f.absorption, f.zeta);
    phantom::Rng rng(s.seed);
    auto cb = phantom::random_bumps(rng, g.spec(), f.bumps, 0.15, 0.3, 0.15, false, 0.05);
    auto rb = phantom::random_bumps(rng, g.spec(), f.bumps, 0.15, 0.3, 0.2, false, 0.05);
    for (std::size_t i = 0; i < g.size(); ++i) {
      Vec3 x = g.point(i);
      p.c[i] = p.c[i].real() * (1.0 + cb.real_value(x));
      p.rho[i] = p.rho[i].real() * (1.0 + rb.real_value(x));
    }
  } else {
    auto load = [&](const std::string& file) {
      auto fld = io::read_scalar(file);
      if (!(fld.grid().spec() == g.spec())) throw ValidationError("fluid field file " + file + " does not match the domain");
      return ScalarField(g, fld.data());
    };
    auto vf = io::read_vector(f.v_file);
    if (!(vf.grid().spec() == g.spec())) throw ValidationError("fluid field file " + f.v_file + " does not match the domain");
    VectorField v(g);
    for (int d = 0; d < 3; ++d) v.comp(d) = vf.comp(d);
    p = {load(f.c_file), v, load(f.rho_file), load(f.alpha0_file), load(f.zeta_file)};
  }
  p.validate();
  return p;
}

// Boundary-flat gauge potential: amplitude times the sin^4 box bump.
inline ScalarField scenario_gauge(const Grid& g, double amplitude) {
  return ScalarField::sample(g, [&](const Vec3& x) { return cplx(amplitude * phantom::box_sin4(x, g.spec()), 0.0); });
}

// Divergence-free difference amplitude * (-d_y psi, d_x psi, 0) with psi the sin^2 box bump.
inline VectorField scenario_rotation(const Grid& g, double amplitude) {
  return VectorField::sample(g, [&](const Vec3& x) {
    auto gp = phantom::box_sin2_gradient(x, g.spec());
    return CVec3{-amplitude * gp[1], amplitude * gp[0], 0.0};
  });
}

}  // namespace cgolab
