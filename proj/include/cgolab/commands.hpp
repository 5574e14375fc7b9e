#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "multifreq.hpp"
#include "probe.hpp"
#include "reconstruct.hpp"
#include "scenario.hpp"

namespace cgolab {

inline constexpr const char* kToolVersion = "1.0.0";

// FNV-1a 64-bit digest of a byte string, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// Files written by one command. On failure the partial outputs are removed.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
  }

  std::string path(const std::string& name) {
    if (std::find(names_.begin(), names_.end(), name) != names_.end())
      throw ValidationError("output " + name + " written twice");
    names_.push_back(name);
    return (dir_ / name).string();
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::filesystem::path& dir() const { return dir_; }

  void discard() {
    for (auto& n : names_) {
      std::error_code ec;
      std::filesystem::remove(dir_ / n, ec);
    }
    names_.clear();
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

struct RunOptions {
  std::string command;
  std::filesystem::path out;
  int threads = 1;
};

struct CommandOutcome {
  nlohmann::ordered_json residuals = nlohmann::ordered_json::object();
  std::vector<Check> checks;
  bool ok = true;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << std::setprecision(17);
  return os;
}

inline void close_csv(std::ofstream& os, const std::string& path) {
  os.close();
  if (!os) throw IoError("write failed for " + path);
}

inline FrequencyPerturbation first_coefficients(const Scenario& s, const Grid& g) {
  return coefficients_from_fluid(build_fluid(s, g), s.frequencies.front());
}

inline double rel_l2(const ScalarField& a, const ScalarField& b) { return l2_norm(a - b) / std::max(l2_norm(b), 1e-300); }
inline double rel_l2(const VectorField& a, const VectorField& b) { return l2_norm(a - b) / std::max(l2_norm(b), 1e-300); }

inline double rel_l2(const TwoFormField& a, const TwoFormField& b) {
  double n = 0.0, d = 0.0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < a.size(); ++i) {
      n += std::norm(a.comp(s)[i] - b.comp(s)[i]);
      d += std::norm(b.comp(s)[i]);
    }
  return std::sqrt(n / std::max(d, 1e-300));
}

}  // namespace detail

// ---- subcommands ----

inline CommandOutcome run_forward(const Scenario& s, OutputSet& out) {
  Grid g(s.domain);
  auto fluid = build_fluid(s, g);
  CommandOutcome res;
  auto& per = res.residuals["frequencies"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < s.frequencies.size(); ++k) {
    auto e = coefficients_from_fluid(fluid, s.frequencies[k]);
    auto co = OperatorCoefficients::magnetic(e.A, e.q);
    auto screen = screen_assumption_A(co);
    if (screen.suspect) warn("forward: " + screen.message);
    BoundaryFunction f{g, g.boundary_nodes(), {}};
    for (auto idx : f.nodes) {
      Vec3 x = g.point(idx);
      f.values.push_back(std::exp(cplx(x[0], 2.0 * x[1])));
    }
    ScalarField u = solve_dirichlet(co, f);
    double r = l2_norm_interior(apply_magnetic_operator(e.A, e.q, u), 1) / std::max(l2_norm_interior(u, 1), 1e-300);
    const std::string tag = "_w" + std::to_string(k);
    io::write_field(out.path("A" + tag + ".cgof"), e.A);
    io::write_field(out.path("q" + tag + ".cgof"), e.q);
    io::write_field(out.path("u" + tag + ".cgof"), u);
    per.push_back({{"omega", e.omega}, {"sigma_min", screen.sigma_min}, {"operator_norm", screen.norm},
                   {"assumption_suspect", screen.suspect}, {"solve_residual", r}});
  }
  return res;
}

inline CommandOutcome run_dtn(const Scenario& s, OutputSet& out) {
  Grid g(s.domain);
  auto e = detail::first_coefficients(s, g);
  ScalarField phi = scenario_gauge(g, s.gauge_amplitude);
  auto [A2, q2] = apply_gauge(e.A, e.q, phi);
  auto d1 = assemble_dtn(e.A, e.q), d2 = assemble_dtn(A2, q2);
  io::write_matrix(out.path("dtn.cgof"), d1.to_boundary_matrix());
  io::write_matrix(out.path("dtn_gauge.cgof"), d2.to_boundary_matrix());
  const double dist = dtn_distance(d1, d2), flat = boundary_flatness(phi);
  const std::string csv = out.path("dtn_report.csv");
  auto os = detail::open_csv(csv);
  os << "omega,boundary_nodes,frobenius_norm,frobenius_distance,relative_distance,gauge_boundary_flatness\n";
  os << e.omega << ',' << d1.nodes.size() << ',' << d1.matrix.norm() << ',' << (d1.matrix - d2.matrix).norm() << ','
     << dist << ',' << flat << '\n';
  detail::close_csv(os, csv);
  CommandOutcome res;
  res.residuals = {{"omega", e.omega}, {"relative_distance", dist}, {"gauge_boundary_flatness", flat}};
  return res;
}

inline CommandOutcome run_cgo(const Scenario& s, OutputSet& out) {
  Grid g(s.domain);
  auto e = detail::first_coefficients(s, g);
  auto co = OperatorCoefficients::magnetic(e.A, e.q);
  const Frame fr = frame_for(s.cgo_xi);
  std::vector<CGODiagnostics> rows;
  double worst = 0.0;
  for (double h : s.h_ladder) {
    auto sol = build_cgo(co, CGOContext::make(s.cgo_xi, fr, h, 1));
    rows.push_back(sol.diag);
    worst = std::max(worst, sol.diag.solve_residual);
  }
  write_diagnostics_csv(out.path("cgo_diagnostics.csv"), rows);
  CommandOutcome res;
  auto pde = nlohmann::ordered_json::array(), rr = nlohmann::ordered_json::array();
  for (auto& d : rows) {
    pde.push_back(d.pde_residual);
    rr.push_back(d.r_h1scl / std::sqrt(d.h));
  }
  res.residuals = {{"xi", {s.cgo_xi[0], s.cgo_xi[1], s.cgo_xi[2]}}, {"h", s.h_ladder}, {"pde_residual", pde},
                   {"r_h1scl_over_sqrt_h", rr}, {"max_solve_residual", worst}};
  return res;
}

inline CommandOutcome run_reconstruct(const Scenario& s, OutputSet& out, int threads) {
  Grid g(s.domain);
  auto e = detail::first_coefficients(s, g);
  ScalarField phi = scenario_gauge(g, s.gauge_amplitude);
  VectorField rot = scenario_rotation(g, s.perturbation);
  auto [A2, q2] = apply_gauge(e.A + rot, e.q, phi);
  MagneticCoefficients c1{e.A, e.q}, c2{A2, q2};
  ReconstructionOptions opt;
  opt.h_ladder = s.h_ladder;
  opt.threads = threads;
  auto lattice = frequency_lattice(g.spec(), s.xi_max);
  std::optional<BoundaryData> data;
  if (s.mode == "dtn") data = BoundaryData{assemble_dtn(e.A, e.q), assemble_dtn(A2, q2)};
  auto slice = recover_fourier_slice(c1, c2, lattice, opt, nullptr, data ? &*data : nullptr);
  auto dA = recover_curl(slice, g);

  const std::string csv = out.path("slice.csv");
  auto os = detail::open_csv(csv);
  os << "k1,k2,k3,xi1,xi2,xi3,mu1_1,mu1_2,mu1_3,mu2_1,mu2_2,mu2_3,a1_re,a1_im,a2_re,a2_im,a3_re,a3_im\n";
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const Frame fr = frame_for(slice.xi[i]);
    os << slice.k[i][0] << ',' << slice.k[i][1] << ',' << slice.k[i][2];
    for (int d = 0; d < 3; ++d) os << ',' << slice.xi[i][d];
    for (int d = 0; d < 3; ++d) os << ',' << fr.mu1[d];
    for (int d = 0; d < 3; ++d) os << ',' << fr.mu2[d];
    for (int d = 0; d < 3; ++d) os << ',' << slice.A_perp[i][d].real() << ',' << slice.A_perp[i][d].imag();
    os << '\n';
  }
  detail::close_csv(os, csv);
  io::write_field(out.path("curl.cgof"), dA);

  CommandOutcome res;
  const VectorField diff = A2 - e.A;
  res.residuals["mode"] = s.mode;
  res.residuals["xi_count"] = slice.size();
  res.residuals["h_ladder"] = s.h_ladder;
  res.residuals["orthogonality_defect"] = orthogonality_defect(slice);
  if (s.perturbation != 0.0) {
    res.residuals["curl_vs_difference_curl"] = detail::rel_l2(dA, curl(diff));
  } else {
    res.residuals["curl_over_jacobian"] = l2_norm(dA) / std::max(jacobian_norm(diff), 1e-300);
    // A2 = A1 + grad phi: the recovered potential closes q2 + 2 A1.grad phi + (grad phi)^2 - i Lap phi = q1
    // with the roles of the two operators exchanged.
    auto fit = gauge_from_curlfree(diff);
    io::write_field(out.path("gauge.cgof"), fit.potential.phi);
    res.residuals["gauge_gradient_mismatch"] = fit.gradient_mismatch;
    res.residuals["q_identity_residual"] = q_identity_residual(q2, e.A, e.q, fit.potential.phi);
  }
  return res;
}

inline CommandOutcome run_boundary(const Scenario& s, OutputSet& out) {
  Grid g(s.domain);
  auto e = detail::first_coefficients(s, g);
  auto ref = std::make_shared<const ProbeReference>(g);
  ProbeOperator op(e.A, e.q, ref);
  std::optional<DtNMap> dtn, dtn0;
  if (s.mode == "dtn") {
    dtn = assemble_dtn(e.A, e.q);
    dtn0 = assemble_dtn(OperatorCoefficients::laplace(g));
  }
  TraceOptions opt;
  opt.lambda_ladder = s.lambda_ladder;
  const std::array<std::array<double, 2>, 3> taus{{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}}};
  const std::string pcsv = out.path("probes.csv"), tcsv = out.path("trace.csv");
  auto ps = detail::open_csv(pcsv), ts = detail::open_csv(tcsv);
  ps << "axis,side,x1,x2,x3,tau1,tau2,lambda,value_re,value_im,extrapolated_re,extrapolated_im\n";
  ts << "axis,side,component,recovered_re,recovered_im,true_re,true_im\n";
  double worst = 0.0;
  for (auto [axis, side] : s.probe_faces) {
    auto face = FaceFrame::make(axis, side);
    Vec3 x0 = face_center(g.spec(), face);
    auto rec = dtn ? recover_trace(*dtn, *dtn0, *ref, x0, face, opt) : recover_trace(op, x0, face, opt);
    for (int j = 0; j < 3; ++j) {
      std::vector<cplx> col;
      for (auto& v : rec.values) col.push_back(v[j]);
      cplx ex = extrapolate_probe(rec.lambdas, col);
      for (std::size_t k = 0; k < rec.lambdas.size(); ++k)
        ps << axis << ',' << side << ',' << x0[0] << ',' << x0[1] << ',' << x0[2] << ',' << taus[j][0] << ','
           << taus[j][1] << ',' << rec.lambdas[k] << ',' << col[k].real() << ',' << col[k].imag() << ','
           << ex.real() << ',' << ex.imag() << '\n';
    }
    std::size_t node = nearest_node(g, x0);
    double scale = 0.0;
    for (int d = 0; d < 3; ++d) scale = std::max(scale, std::abs(e.A.comp(d)[node]));
    for (int d = 0; d < 3; ++d) {
      cplx t = e.A.comp(d)[node];
      ts << axis << ',' << side << ',' << d << ',' << rec.trace[d].real() << ',' << rec.trace[d].imag() << ','
         << t.real() << ',' << t.imag() << '\n';
      worst = std::max(worst, std::abs(rec.trace[d] - t) / std::max(scale, 1e-300));
    }
  }
  detail::close_csv(ps, pcsv);
  detail::close_csv(ts, tcsv);
  CommandOutcome res;
  res.residuals = {{"mode", s.mode}, {"faces", s.probe_faces.size()}, {"lambda_ladder", s.lambda_ladder},
                   {"max_component_error", worst}};
  return res;
}

inline CommandOutcome run_fluids(const Scenario& s, OutputSet& out) {
  Grid g(s.domain);
  auto truth = build_fluid(s, g);
  const std::size_t ref = nearest_node(g, g.spec().center());
  auto exact = extract_exact(frequency_set(truth, s.frequencies), truth.zeta, ref);

  auto measured = truth;
  for (auto& z : measured.rho.data()) z *= s.density_factor;
  ScalarField chi = scenario_gauge(g, s.gauge_amplitude);
  // the integrated flow gauge carries the O(h^2) error of the difference gradient
  GaugeRobustOptions gro;
  const double hmax = g.max_spacing();
  gro.velocity.trace_tol = std::max(gro.velocity.trace_tol, 0.25 * hmax * hmax);
  auto robust = extract_gauge_robust(gauge_perturbed_set(measured, s.frequencies, chi), truth, truth.zeta, ref, gro);

  io::write_field(out.path("c.cgof"), robust.c);
  io::write_field(out.path("v.cgof"), robust.v);
  io::write_field(out.path("rho_normalized.cgof"), robust.rho_normalized);
  io::write_field(out.path("alpha0.cgof"), robust.alpha0);

  ScalarField rho_ref = truth.rho;
  const cplx r0 = rho_ref[ref];
  for (auto& z : rho_ref.data()) z /= r0;
  const std::string csv = out.path("comparison.csv");
  auto os = detail::open_csv(csv);
  os << "mode,field,relative_l2_error\n";
  CommandOutcome res;
  for (auto [name, rf] : {std::pair<const char*, const RecoveredFluid*>{"exact", &exact}, {"gauge_robust", &robust}}) {
    double ec = detail::rel_l2(rf->c, truth.c), ev = detail::rel_l2(rf->v, truth.v);
    double er = detail::rel_l2(rf->rho_normalized, rho_ref), ea = detail::rel_l2(rf->alpha0, truth.alpha0);
    os << name << ",c," << ec << '\n' << name << ",v," << ev << '\n' << name << ",rho_normalized," << er << '\n'
       << name << ",alpha0," << ea << '\n';
    res.residuals[name] = {{"c", ec}, {"v", ev}, {"rho_normalized", er}, {"alpha0", ea},
                           {"chi_relative_range", rf->chi_relative_range},
                           {"density_relative_range", rf->density_relative_range},
                           {"power_fit_residual", rf->power_fit_residual}};
  }
  detail::close_csv(os, csv);
  res.residuals["frequencies"] = s.frequencies;
  res.residuals["density_factor"] = s.density_factor;
  return res;
}

// Invariant suite on the scenario grid. Each check is a property that holds independently of the
// resolution, or a refinement trend between the scenario grid and the next finer one.
inline CommandOutcome run_verify(const Scenario& s, OutputSet& out) {
  Grid g(s.domain);
  const DomainSpec fine_spec = make_domain(s.domain.lower, s.domain.upper,
                                           {2 * s.domain.n[0] - 1, 2 * s.domain.n[1] - 1, 2 * s.domain.n[2] - 1});
  Grid fine(fine_spec);
  auto fluid = build_fluid(s, g);
  auto e = coefficients_from_fluid(fluid, s.frequencies.front());
  std::vector<Check> checks;
  auto below = [&](const std::string& name, double v, double t) { checks.push_back({name, v, t, v < t}); };
  auto above = [&](const std::string& name, double v, double t) { checks.push_back({name, v, t, v > t}); };

  // gauge pairs share the DtN map up to discretization error, which shrinks under refinement
  {
    auto dist = [&](const Grid& gg) {
      auto ee = coefficients_from_fluid(build_fluid(s, gg), s.frequencies.front());
      auto [A2, q2] = apply_gauge(ee.A, ee.q, scenario_gauge(gg, s.gauge_amplitude));
      return dtn_distance(assemble_dtn(ee.A, ee.q), assemble_dtn(A2, q2));
    };
    double d0 = dist(g), d1 = dist(fine);
    below("dtn_gauge_distance_fine", d1, 5e-2);
    above("dtn_gauge_refinement_ratio", d0 / d1, 1.0);
  }
  // conjugation identity converges at second order
  {
    auto resid = [&](const Grid& gg) {
      auto ee = coefficients_from_fluid(build_fluid(s, gg), s.frequencies.front());
      auto phi = scenario_gauge(gg, s.gauge_amplitude);
      auto [A1, q1] = apply_gauge(ee.A, ee.q, phi);
      auto u = ScalarField::sample(gg, [](const Vec3& x) { return std::exp(cplx(x[0] - x[2], 2 * x[1])); });
      return conjugation_residual(A1, q1, ee.A, ee.q, phi, u);
    };
    above("conjugation_refinement_ratio", resid(g) / resid(fine), 3.0);
  }
  // the Cauchy transform is odd in the direction
  {
    Frame fr = frame_for({0.3, 1.0, 0.2});
    CVec3 z0{cplx(fr.mu1[0], fr.mu2[0]), cplx(fr.mu1[1], fr.mu2[1]), cplx(fr.mu1[2], fr.mu2[2])};
    CVec3 zm{-z0[0], -z0[1], -z0[2]};
    auto f = ScalarField::sample(g, [](const Vec3& x) { return cplx(phantom::ball_bump(x, {0.5, 0.5, 0.45}, 0.3), 0.0); });
    auto p = cauchy_transform(f, z0, g), m = cauchy_transform(f, zm, g);
    below("cauchy_antisymmetry", max_abs(p + m) / max_abs(p), 1e-12);
  }
  // CGO: zero coefficients give the exact exponential; otherwise a + r solves the grid equation
  {
    auto free = build_cgo(OperatorCoefficients::laplace(g), CGOContext::make(s.cgo_xi, frame_for(s.cgo_xi), s.h_ladder.front(), 1));
    double dev = max_abs(free.r);
    for (std::size_t i = 0; i < g.size(); ++i) dev = std::max(dev, std::abs(free.a[i] - 1.0));
    below("cgo_free_exact", dev, 1e-300);
    auto co = OperatorCoefficients::magnetic(e.A, e.q);
    double worst = 0.0;
    for (double h : s.h_ladder)
      worst = std::max(worst, build_cgo(co, CGOContext::make(s.cgo_xi, frame_for(s.cgo_xi), h, 1)).diag.solve_residual);
    below("cgo_solve_residual", worst, 1e-9);
  }
  // identical coefficients pair to zero
  {
    Vec3 xi{2.0 * std::numbers::pi, 0.0, 0.0};
    auto p = pairing_from_cgo({e.A, e.q}, {e.A, e.q}, xi, frame_for(xi), 0.2);
    below("pairing_identical", std::abs(p.value), 1e-12);
  }
  // gauge closure: potential fit and q identity improve under refinement
  {
    auto closure = [&](const Grid& gg) {
      auto ee = coefficients_from_fluid(build_fluid(s, gg), s.frequencies.front());
      auto [A2, q2] = apply_gauge(ee.A, ee.q, scenario_gauge(gg, s.gauge_amplitude));
      auto fit = gauge_from_curlfree(A2 - ee.A);
      return std::pair{fit.gradient_mismatch, q_identity_residual(q2, ee.A, ee.q, fit.potential.phi)};
    };
    auto [f0, r0] = closure(g);
    auto [f1, r1] = closure(fine);
    above("gauge_fit_refinement_ratio", f0 / f1, 1.0);
    above("q_identity_refinement_ratio", r0 / r1, 1.0);
  }
  // probe: coefficient and boundary-data evaluations coincide, the free operator gives zero
  {
    ProbeSpec p;
    p.lambda = s.lambda_ladder.front();
    p.x0 = face_center(g.spec(), p.face);
    cplx direct = probe_value(e.A, e.q, p).value;
    cplx data = probe_value(assemble_dtn(e.A, e.q), assemble_dtn(OperatorCoefficients::laplace(g)), p);
    below("probe_modes_agree", std::abs(direct - data) / std::max(std::abs(direct), 1e-300), 1e-9);
    below("probe_free_operator", std::abs(probe_value(VectorField(g), ScalarField(g), p).value), 1e-300);
  }
  // frequency splitting and extraction
  {
    auto set = frequency_set(fluid, s.frequencies);
    auto split = split_by_frequency(set, set);
    double m = std::max(max_abs(split.speed_flow), max_abs(split.density));
    for (auto& f : split.drift_absorption) m = std::max(m, max_abs(f));
    below("split_identical", m, 1e-10);
    auto scaled = fluid;
    for (auto& z : scaled.rho.data()) z *= s.density_factor;
    below("split_density_scaling", max_abs(split_by_frequency(frequency_set(scaled, s.frequencies), set).density), 1e-10);
    const std::size_t ref = nearest_node(g, g.spec().center());
    auto ex = extract_exact(set, fluid.zeta, ref);
    below("extract_exact_c", detail::rel_l2(ex.c, fluid.c), 1e-12);
    below("extract_exact_v", l2_norm(ex.v - fluid.v) / std::max(l2_norm(fluid.v), 1.0), 1e-12);
    below("extract_exact_alpha0", max_abs(ex.alpha0 - fluid.alpha0), 1e-8);
    auto rb = extract_gauge_robust(gauge_perturbed_set(scaled, s.frequencies, scenario_gauge(g, 0.05)), fluid, fluid.zeta, ref);
    below("gauge_robust_chi_certificate", rb.chi_relative_range, 1e-3);
    below("gauge_robust_density_certificate", rb.density_relative_range, 1e-3);
  }
  // discrete maximum principle of the upwind drift solve
  {
    auto b = VectorField::sample(g, [](const Vec3& x) {
      return CVec3{200.0 * std::sin(6.0 * x[1]), -150.0 * std::cos(5.0 * x[2]), 100.0};
    });
    auto src = ScalarField::sample(g, [](const Vec3& x) { return cplx(phantom::gaussian(x, {0.5, 0.5, 0.5}, 0.1), 0.0); });
    ScalarField u = solve_drift(b, src, 0.7);
    double lo = INFINITY;
    for (auto& z : u.data()) lo = std::min(lo, z.real());
    above("drift_minimum_principle", lo - 0.7, -1e-12);
  }

  const std::string csv = out.path("verify.csv");
  auto os = detail::open_csv(csv);
  os << "check,value,threshold,result\n";
  CommandOutcome res;
  for (auto& c : checks) {
    os << c.name << ',' << c.value << ',' << c.threshold << ',' << (c.pass ? "PASS" : "FAIL") << '\n';
    res.residuals[c.name] = {{"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}};
    res.ok = res.ok && c.pass;
  }
  detail::close_csv(os, csv);
  res.checks = std::move(checks);
  return res;
}

// ---- driver ----

inline nlohmann::ordered_json scenario_summary(const Scenario& s) {
  nlohmann::ordered_json j;
  j["path"] = s.path;
  j["hash"] = fnv1a_hex(s.source);
  j["domain"] = {{"lower", s.domain.lower}, {"upper", s.domain.upper}, {"nodes", s.domain.n}};
  j["phantom"] = s.fluid.phantom;
  j["frequencies"] = s.frequencies;
  j["mode"] = s.mode;
  return j;
}

// Runs one subcommand into opt.out and writes <command>.manifest.json. Outputs of a failed run
// are removed before the exception propagates.
inline CommandOutcome run_command(const Scenario& s, const RunOptions& opt) {
  static const std::map<std::string, std::function<CommandOutcome(const Scenario&, OutputSet&, int)>> table{
      {"forward", [](const Scenario& sc, OutputSet& o, int) { return run_forward(sc, o); }},
      {"dtn", [](const Scenario& sc, OutputSet& o, int) { return run_dtn(sc, o); }},
      {"cgo-diagnose", [](const Scenario& sc, OutputSet& o, int) { return run_cgo(sc, o); }},
      {"reconstruct", [](const Scenario& sc, OutputSet& o, int t) { return run_reconstruct(sc, o, t); }},
      {"boundary", [](const Scenario& sc, OutputSet& o, int) { return run_boundary(sc, o); }},
      {"fluids", [](const Scenario& sc, OutputSet& o, int) { return run_fluids(sc, o); }},
      {"verify", [](const Scenario& sc, OutputSet& o, int) { return run_verify(sc, o); }}};
  auto it = table.find(opt.command);
  if (it == table.end()) throw ValidationError("unknown command " + opt.command);
  if (opt.threads < 1) throw ValidationError("threads must be >= 1");
  OutputSet out(opt.out);
  try {
    CommandOutcome res = it->second(s, out, opt.threads);
    nlohmann::ordered_json m;
    m["tool"] = "cgolab";
    m["version"] = kToolVersion;
    m["command"] = opt.command;
    m["scenario"] = scenario_summary(s);
    m["seed"] = s.seed;
    m["threads"] = opt.threads;
    auto inputs = nlohmann::ordered_json::array();
    if (s.fluid.phantom == "files")
      for (const auto* f : {&s.fluid.c_file, &s.fluid.v_file, &s.fluid.rho_file, &s.fluid.alpha0_file, &s.fluid.zeta_file})
        inputs.push_back({{"file", *f}, {"hash", fnv1a_hex(file_bytes(*f))}});
    m["inputs"] = inputs;
    auto outputs = nlohmann::ordered_json::array();
    for (auto& n : out.names()) {
      std::string bytes = file_bytes((out.dir() / n).string());
      outputs.push_back({{"file", n}, {"bytes", bytes.size()}, {"hash", fnv1a_hex(bytes)}});
    }
    m["outputs"] = outputs;
    m["residuals"] = res.residuals;
    m["status"] = res.ok ? "ok" : "failed";
    const std::string mpath = out.path(opt.command + ".manifest.json");
    std::ofstream os(mpath, std::ios::trunc);
    if (!os) throw IoError("cannot open " + mpath + " for writing");
    os << m.dump(2) << '\n';
    os.close();
    if (!os) throw IoError("write failed for " + mpath);
    return res;
  } catch (...) {
    out.discard();
    throw;
  }
}

}  // namespace cgolab
