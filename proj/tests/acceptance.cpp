// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "cgolab/commands.hpp"
#include "support.hpp"

using namespace cgolab;
using cgolab::testing::strictly_decreasing;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_l2(const TwoFormField& a, const TwoFormField& b) {
  double n = 0.0, d = 0.0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < a.size(); ++i) {
      n += std::norm(a.comp(s)[i] - b.comp(s)[i]);
      d += std::norm(b.comp(s)[i]);
    }
  return std::sqrt(n / d);
}

double max_rel(const ScalarField& a, const ScalarField& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-300); }
double max_rel(const VectorField& a, const VectorField& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-300); }

ScalarField box_sin4_field(const Grid& g, double amp) {
  const auto dom = g.spec();
  return ScalarField::sample(g, [&](const Vec3& x) { return cplx(amp * phantom::box_sin4(x, dom), 0.0); });
}

void gauge_invariance(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<double> dist;
    for (int n : {17, 25}) {
      Grid g(unit_cube(n));
      phantom::Rng rng(seed);
      auto ab = phantom::random_bumps(rng, g.spec(), 3, 0.2, 0.3, 1.0, true, 0.05);
      auto qb = phantom::random_bumps(rng, g.spec(), 2, 0.2, 0.3, 1.0, true, 0.05);
      auto pb = phantom::random_bumps(rng, g.spec(), 2, 0.25, 0.35, 1.0, false, 0.05);
      VectorField A(g);
      ScalarField q(g), phi(g);
      for (std::size_t i = 0; i < g.size(); ++i) {
        Vec3 x = g.point(i);
        cplx b = ab.value(x);
        A.set(i, {b, 0.5 * b, cplx(0.2, 0.3) * b});
        q[i] = qb.value(x);
        phi[i] = pb.real_value(x);
      }
      // the bumps sit 0.05 inside the faces, so phi and all its derivatives vanish there
      double on_boundary = 0.0;
      for (auto idx : g.boundary_nodes()) on_boundary = std::max(on_boundary, std::abs(phi[idx]));
      v.require(on_boundary == 0.0, "seed " + std::to_string(seed) + " n=" + std::to_string(n) + " gauge vanishes on faces");
      auto [A2, q2] = apply_gauge(A, q, phi);
      dist.push_back(dtn_distance(assemble_dtn(A, q), assemble_dtn(A2, q2)));
    }
    v.require(dist[1] < dist[0] && dist[1] < 5e-2,
              "seed " + std::to_string(seed) + ": " + fmt(dist[0]) + " -> " + fmt(dist[1]));
  }
  const double t = seconds_since(t0);
  v.require(t <= 120.0, "runtime " + fmt(t) + " s");
}

void conjugation(Verdict& v) {
  auto residual = [](int n, int which) {
    Grid g(unit_cube(n));
    auto A = VectorField::sample(g, [&](const Vec3& x) {
      return which == 0 ? CVec3{std::sin(x[1]), cplx(0, 0.3) * x[0], 0.5}
                        : CVec3{cplx(x[2], 0.2), std::cos(2 * x[0]), x[0] * x[1]};
    });
    auto q = ScalarField::sample(g, [&](const Vec3& x) { return cplx(1 + x[0] * x[1], which * 0.5); });
    auto phi = ScalarField::sample(g, [&](const Vec3& x) {
      return which == 0 ? cplx(std::sin(2 * x[0]) * x[1] * x[2], 0) : cplx(std::exp(-x[0] * x[0]) * std::cos(x[2]), 0);
    });
    auto u = ScalarField::sample(g, [](const Vec3& x) { return std::exp(cplx(x[0] - x[2], 2 * x[1])); });
    auto [A1, q1] = apply_gauge(A, q, phi);
    return conjugation_residual(A1, q1, A, q, phi, u);
  };
  for (int which = 0; which < 2; ++which) {
    double ratio = residual(17, which) / residual(33, which);
    v.require(ratio >= 3.0, "pair " + std::to_string(which) + " ratio " + fmt(ratio));
  }
}

void mollifier(Verdict& v) {
  const std::vector<double> taus{0.2, 0.1, 0.05};
  {
    Grid g(unit_cube(65));
    auto step = ScalarField::sample(g, [](const Vec3& x) {
      bool in = x[0] > 0.3 && x[0] < 0.7 && x[1] > 0.3 && x[1] < 0.7 && x[2] > 0.3 && x[2] < 0.7;
      return cplx(in ? 1.0 : 0.0, 0.0);
    });
    std::vector<double> err, grad;
    for (double tau : taus) {
      auto m = mollify(step, {tau});
      err.push_back(l2_norm(m - step));
      grad.push_back(max_abs(gradient(m)));
    }
    v.require(strictly_decreasing(err), "step |V-Vt| decreasing");
    double s = loglog_slope(taus, grad);
    v.require(std::abs(s + 1.0) <= 0.3, "step |grad Vt|inf slope " + fmt(s));
  }
  {
    const double L = 1.2, sigma = 0.25;
    Grid g(make_domain({-L, -L, -L}, {L, L, L}, {97, 97, 97}));
    auto smooth = ScalarField::sample(g, [&](const Vec3& x) { return cplx(std::exp(-dot3(x, x) / (2 * sigma * sigma)), 0); });
    std::vector<double> err, l2, grad, sup, hess;
    for (double tau : taus) {
      auto m = mollify(smooth, {tau});
      err.push_back(l2_norm(m - smooth));
      l2.push_back(l2_norm(m));
      grad.push_back(l2_norm(gradient(m)));
      sup.push_back(max_abs(m));
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) d2 += std::pow(l2_norm(partial(partial(m, a), b)), 2);
      hess.push_back(std::sqrt(d2));
    }
    auto slope_near = [&](const std::string& name, const std::vector<double>& y, double expected) {
      double s = loglog_slope(taus, y);
      v.require(std::abs(s - expected) <= 0.3, "smooth " + name + " slope " + fmt(s));
    };
    v.require(strictly_decreasing(err), "smooth |V-Vt| decreasing");
    slope_near("|V-Vt|", err, 2.0);
    slope_near("|Vt|", l2, 0.0);
    slope_near("|grad Vt|", grad, 0.0);
    slope_near("|Vt|inf", sup, 0.0);
    slope_near("|D2 Vt|", hess, 0.0);
  }
}

void cauchy(Verdict& v) {
  auto z0 = cgolab::testing::null_direction(frame_for({0.3, 1.0, 0.2}));
  CVec3 zm{-z0[0], -z0[1], -z0[2]};
  double worst_res = 0.0, worst_anti = 0.0;
  Grid g(unit_cube(17));
  for (const auto& b : cgolab::testing::transform_bumps()) {
    worst_res = std::max(worst_res, cgolab::testing::plane_forward_residual(b, b.box(), z0, b.center, 0.5, 65, 128, 0.25 / 64));
    auto f = ScalarField::sample(g, b);
    auto p = cauchy_transform(f, z0, g), m = cauchy_transform(f, zm, g);
    worst_anti = std::max(worst_anti, max_abs(p + m) / max_abs(p));
  }
  v.require(worst_res < 1e-2, "forward residual " + fmt(worst_res));
  v.require(worst_anti <= 1e-12, "antisymmetry " + fmt(worst_anti));
}

void cgo_contract(Verdict& v) {
  Grid g(unit_cube(17));
  auto A = VectorField::sample(g, [](const Vec3& x) {
    double b = phantom::ball_bump(x, {0.5, 0.5, 0.5}, 0.35);
    return CVec3{b, 0.5 * b, cplx(0, 0.3) * b};
  });
  auto q = ScalarField::sample(g, [](const Vec3& x) { return cplx(phantom::ball_bump(x, {0.45, 0.5, 0.55}, 0.3), 0.0); });
  auto co = OperatorCoefficients::magnetic(A, q);
  std::vector<double> pde, rr;
  for (double h : {0.4, 0.2, 0.1}) {
    auto s = build_cgo(co, CGOContext::make({4, 0, 0}, frame_for({1, 0, 0}), h, 1));
    pde.push_back(s.diag.pde_residual);
    rr.push_back(s.diag.r_h1scl / std::sqrt(h));
  }
  v.require(strictly_decreasing(pde), "|Pu|/|u| " + fmt(pde[0]) + " " + fmt(pde[1]) + " " + fmt(pde[2]));
  v.require(strictly_decreasing(rr), "|r|/h^1/2 " + fmt(rr[0]) + " " + fmt(rr[1]) + " " + fmt(rr[2]));
  auto ctx = CGOContext::make({4, 0, 0}, frame_for({1, 0, 0}), 0.2, 1);
  auto free = build_cgo(OperatorCoefficients::laplace(g), ctx);
  double dev = max_abs(free.r);
  for (std::size_t i = 0; i < g.size(); ++i) dev = std::max(dev, std::abs(free.a[i] - 1.0));
  v.require(dev <= 1e-12 && std::abs(dot3(ctx.zeta, ctx.zeta)) < 1e-14 && free.diag.solve_residual < 1e-12,
            "V=0 exact exponential (r, a-1: " + fmt(dev) + ")");
}

void curl_recovery(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  Grid g(unit_cube(17));
  const auto dom = g.spec();
  VectorField A1 = VectorField::sample(g, [&](const Vec3& x) {
    double b = phantom::box_sin2(x, dom);
    return CVec3{0.5 * b, 0.25 * b, -0.15 * b};
  });
  ScalarField q1 = ScalarField::sample(g, [&](const Vec3& x) { return cplx(2.0 * phantom::box_sin2(x, dom), 0); });
  auto lattice = frequency_lattice(dom, 2 * pi);
  ReconstructionOptions opt;
  {
    auto [A2, q2] = apply_gauge(A1, q1, box_sin4_field(g, 0.2));
    auto dA = recover_curl(recover_fourier_slice({A1, q1}, {A2, q2}, lattice, opt), g);
    double r = l2_norm(dA) / jacobian_norm(A2 - A1);
    v.require(r < 1e-2, "gauge pair |dA| relative " + fmt(r));
  }
  {
    VectorField D = VectorField::sample(g, [&](const Vec3& x) {
      auto gp = phantom::box_sin2_gradient(x, dom);
      return CVec3{-0.3 * gp[1], 0.3 * gp[0], 0.0};
    });
    auto dA = recover_curl(recover_fourier_slice({A1, q1}, {A1 + D, q1}, lattice, opt), g);
    double r = rel_l2(dA, curl(D));
    v.require(r < 0.1, "non-gradient dA vs FD curl " + fmt(r));
  }
  const double t = seconds_since(t0);
  v.require(t <= 600.0, "runtime " + fmt(t) + " s");
}

void gauge_closure(Verdict& v) {
  std::vector<double> fit, res;
  for (int n : {17, 33}) {
    Grid g(unit_cube(n));
    const auto dom = g.spec();
    VectorField A2 = VectorField::sample(g, [&](const Vec3& x) {
      double b = phantom::box_sin2(x, dom);
      return CVec3{0.5 * b, cplx(0.0, 0.2) * b, -0.15 * b};
    });
    ScalarField q2 = ScalarField::sample(g, [&](const Vec3& x) { return cplx(2.0 * phantom::box_sin2(x, dom), 0.0); });
    VectorField gphi = VectorField::sample(g, [&](const Vec3& x) {
      auto d = phantom::box_sin4_gradient(x, dom);
      return CVec3{0.2 * d[0], 0.2 * d[1], 0.2 * d[2]};
    });
    ScalarField lphi = ScalarField::sample(g, [&](const Vec3& x) {
      double l = 0.0;
      for (int a = 0; a < 3; ++a) {
        double s = std::sin(pi * x[a]), c = std::cos(pi * x[a]);
        double other = 1.0;
        for (int b = 0; b < 3; ++b)
          if (b != a) other *= std::pow(std::sin(pi * x[b]), 4);
        l += (12.0 * s * s * c * c - 4.0 * s * s * s * s) * pi * pi * other;
      }
      return cplx(0.2 * l, 0.0);
    });
    // analytic gauge transform of (A2, q2)
    VectorField A1 = A2 + gphi;
    ScalarField q1(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      cplx ag = 0.0, gg = 0.0;
      for (int d = 0; d < 3; ++d) {
        ag += A2.comp(d)[i] * gphi.comp(d)[i];
        gg += gphi.comp(d)[i] * gphi.comp(d)[i];
      }
      q1[i] = q2[i] + 2.0 * ag + gg - cplx(0, 1) * lphi[i];
    }
    auto gf = gauge_from_curlfree(A1 - A2);
    fit.push_back(gf.gradient_mismatch);
    res.push_back(q_identity_residual(q1, A2, q2, gf.potential.phi));
  }
  v.require(fit[1] < 5e-2 && fit[1] < fit[0], "grad phi fit " + fmt(fit[0]) + " -> " + fmt(fit[1]));
  v.require(res[1] < 5e-2 && res[1] < res[0], "q identity " + fmt(res[0]) + " -> " + fmt(res[1]));
}

void boundary_traces(Verdict& v) {
  Grid g(unit_cube(33));
  auto ref = std::make_shared<const ProbeReference>(g);
  {
    auto [A, q] = phantom::trace_pair(g);
    ProbeOperator op(A, q, ref);
    TraceOptions opt;
    opt.lambda_ladder = {0.2, 0.1, 0.05};
    for (auto face : {FaceFrame::make(2, 0), FaceFrame::make(0, 1), FaceFrame::make(1, 0)}) {
      Vec3 x0 = face_center(g.spec(), face);
      CVec3 truth = phantom::trace_field(x0);
      auto rec = recover_trace(op, x0, face, opt);
      double scale = std::max({std::abs(truth[0]), std::abs(truth[1]), std::abs(truth[2])}), worst = 0.0;
      for (int d = 0; d < 3; ++d) worst = std::max(worst, std::abs(rec.trace[d] - truth[d]) / scale);
      v.require(worst < 0.05, "face (" + std::to_string(face.axis) + "," + std::to_string(face.side) + ") error " + fmt(worst));
    }
  }
  {
    ScalarField q(g);
    for (std::size_t i = 0; i < g.size(); ++i) q[i] = 1.0 + g.point(i)[0];
    ProbeOperator op(VectorField(g), q, ref);
    std::vector<double> l{0.2, 0.1, 0.05}, v0, qt, qb;
    for (double lambda : l) {
      ProbeSpec p;
      p.lambda = lambda;
      auto r = op.probe(p);
      v0.push_back(r.v0_l2);
      qt.push_back(std::abs(r.q_term));
      qb.push_back(r.q_bound);
    }
    double s0 = loglog_slope(l, v0), st = loglog_slope(l, qt), sb = loglog_slope(l, qb);
    v.require(std::abs(s0 - 1.0) <= 0.25, "|v0| slope " + fmt(s0));
    v.require(std::abs(st - 0.5) <= 0.25, "q-term slope " + fmt(st));
    v.require(std::abs(sb - 0.5) <= 0.25, "q-term bound slope " + fmt(sb));
  }
}

void multifrequency(Verdict& v) {
  Grid g(unit_cube(33));
  auto truth = phantom::smooth_fluid(g, 0.1, 0.5);
  const std::size_t ref = nearest_node(g, g.spec().center());
  ScalarField rho_ref = truth.rho;
  const cplx r0 = rho_ref[ref];
  for (auto& z : rho_ref.data()) z /= r0;
  auto measured = truth;
  for (auto& z : measured.rho.data()) z *= 2.5;
  for (auto omegas : {std::vector<double>{0.5, 2.0}, std::vector<double>{0.5, 2.0, 3.0}}) {
    const std::string tag = omegas.size() == 2 ? "{0.5,2}" : "{0.5,2,3}";
    auto ex = extract_exact(frequency_set(truth, omegas), truth.zeta, ref);
    double ec = max_rel(ex.c, truth.c), ev = max_rel(ex.v, truth.v), er = max_rel(ex.rho_normalized, rho_ref);
    double ea = max_abs(ex.alpha0 - truth.alpha0);
    v.require(ec < 1e-12 && ev < 1e-12 && er < 5e-3 && ea < 1e-8,
              "exact " + tag + " c " + fmt(ec) + " v " + fmt(ev) + " rho " + fmt(er) + " alpha " + fmt(ea));
    auto rb = extract_gauge_robust(gauge_perturbed_set(measured, omegas, box_sin4_field(g, 0.05)), truth, truth.zeta, ref);
    ec = max_rel(rb.c, truth.c);
    ev = max_rel(rb.v, truth.v);
    er = max_rel(rb.rho_normalized, rho_ref);
    ea = max_abs(rb.alpha0 - truth.alpha0);
    v.require(ec < 1e-12 && ev < 1e-12 && er < 5e-3 && ea < 1e-8 && rb.chi_relative_range < 1e-3,
              "gauge-robust " + tag + " c " + fmt(ec) + " v " + fmt(ev) + " rho " + fmt(er) + " alpha " + fmt(ea) +
                  " chi range " + fmt(rb.chi_relative_range));
  }
}

void determinism(Verdict& v) {
  const fs::path base = fs::path(CGOLAB_BINARY_DIR) / "acceptance_determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string scenario = std::string(CGOLAB_SOURCE_DIR) + "/scenarios/verify.yaml";
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"run1", "run2"}) {
    const fs::path out = base / name;
    int rc = std::system((std::string(CGOLAB_CLI_PATH) + " verify --scenario " + scenario + " --out " + out.string() +
                          " > " + (base / (std::string(name) + ".log")).string() + " 2>&1")
                             .c_str());
    int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    v.require(code == 0, std::string(name) + " exit " + std::to_string(code));
    std::map<std::string, std::string> files;
    if (fs::is_directory(out))
      for (auto& e : fs::directory_iterator(out)) files[e.path().filename().string()] = file_bytes(e.path().string());
    runs.push_back(std::move(files));
  }
  v.require(!runs[0].empty() && runs[0] == runs[1], std::to_string(runs[0].size()) + " files byte-identical");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, void (*)(Verdict&)>> criteria{
      {"gauge invariance of the DtN map", gauge_invariance},
      {"conjugation identity", conjugation},
      {"mollifier estimates", mollifier},
      {"Cauchy transform oracle", cauchy},
      {"CGO contract", cgo_contract},
      {"curl recovery", curl_recovery},
      {"gauge and q closure", gauge_closure},
      {"boundary determination", boundary_traces},
      {"multifrequency extraction", multifrequency},
      {"determinism of verify", determinism}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[k].second(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << " (" << criteria[k].first << ", "
              << fmt(seconds_since(t0)) << " s): " << v.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
