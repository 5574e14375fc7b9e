#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "cgolab/cgo.hpp"
#include "cgolab/phantom.hpp"
#include "support.hpp"

using namespace cgolab;
using cgolab::testing::loglog_slope;
using cgolab::testing::null_direction;
using cgolab::testing::strictly_decreasing;

namespace {

OperatorCoefficients smooth_magnetic(const Grid& g) {
  auto A = VectorField::sample(g, [](const Vec3& x) {
    double b = phantom::ball_bump(x, {0.5, 0.5, 0.5}, 0.35);
    return CVec3{b, 0.5 * b, cplx(0, 0.3) * b};
  });
  auto q = ScalarField::sample(g, [](const Vec3& x) { return cplx(phantom::ball_bump(x, {0.45, 0.5, 0.55}, 0.3), 0.0); });
  return OperatorCoefficients::magnetic(A, q);
}

}  // namespace

TEST(Mollifier, KernelBoundsAndMass) {
  for (double r = 0.0; r <= 1.2; r += 0.01) {
    double v = mollifier_kernel({r, 0, 0});
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, mollifier_kernel({0, r * 0.6, r * 0.8}), 1e-14);
  }
  EXPECT_EQ(mollifier_kernel({1.0, 0, 0}), 0.0);
  Grid g(unit_cube(33));
  for (double tau : {0.07, 0.2}) {
    double m = 0.0;
    for (const auto& k : discrete_kernel(g, {tau})) m += k.w;
    EXPECT_NEAR(m, 1.0, 1e-10);
  }
}

TEST(Mollifier, ConstantInteriorUnchanged) {
  Grid g(unit_cube(33));
  auto f = ScalarField::sample(g, [](const Vec3& x) {
    bool in = x[0] > 0.15 && x[0] < 0.85 && x[1] > 0.15 && x[1] < 0.85 && x[2] > 0.15 && x[2] < 0.85;
    return cplx(in ? 2.0 : 0.0, in ? -1.0 : 0.0);
  });
  const double tau = 0.1;
  auto m = mollify(f, {tau});
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.point(i);
    bool deep = true;
    for (int d = 0; d < 3; ++d) deep = deep && x[d] > 0.15 + tau + 1e-9 && x[d] < 0.85 - tau - 1e-9;
    if (deep) EXPECT_NEAR(std::abs(m[i] - cplx(2.0, -1.0)), 0.0, 1e-10);
  }
}

TEST(Mollifier, FftMatchesDirectConvolution) {
  Grid g(unit_cube(21));
  phantom::Rng rng(7);
  ScalarField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
  auto ks = discrete_kernel(g, {0.2});
  auto direct = detail::convolve_direct(f, ks);
  detail::FftConvolver conv(g, ks);
  auto fft = conv.apply(f);
  EXPECT_LT(l2_norm(fft - direct), 1e-13 * l2_norm(direct));
}

TEST(Mollifier, NarrowWidthWarnsAndReturnsInput) {
  Grid g(unit_cube(9));
  auto f = ScalarField::sample(g, [](const Vec3& x) { return cplx(x[0], 0); });
  std::vector<std::string> seen;
  auto saved = warning_sink();
  warning_sink() = [&](const std::string& m) { seen.push_back(m); };
  auto m = mollify(f, {0.05});
  warning_sink() = saved;
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(l2_norm(m - f), 0.0);
  EXPECT_THROW(mollify(f, {-1.0}), ValidationError);
}

TEST(Mollifier, StepFieldGradientGrowsLikeInverseWidth) {
  Grid g(unit_cube(65));
  auto step = ScalarField::sample(g, [](const Vec3& x) {
    bool in = x[0] > 0.3 && x[0] < 0.7 && x[1] > 0.3 && x[1] < 0.7 && x[2] > 0.3 && x[2] < 0.7;
    return cplx(in ? 1.0 : 0.0, 0.0);
  });
  std::vector<double> taus{0.2, 0.1, 0.05}, err, grad;
  for (double tau : taus) {
    auto m = mollify(step, {tau});
    err.push_back(l2_norm(m - step));
    grad.push_back(max_abs(gradient(m)));
  }
  EXPECT_TRUE(strictly_decreasing(err));
  EXPECT_NEAR(loglog_slope(taus, grad), -1.0, 0.3);
}

TEST(Cauchy, ZeroInputAndBadDirection) {
  Grid g(unit_cube(9));
  Frame fr = frame_for({1, 2, 3});
  auto z0 = null_direction(fr);
  EXPECT_EQ(max_abs(cauchy_transform(ScalarField(g), z0, g)), 0.0);
  CVec3 bad{1.0, cplx(0, 2.0), 0.0};
  EXPECT_THROW(cauchy_transform(ScalarField(g), bad, g), ValidationError);
  EXPECT_THROW(cauchy_transform(ScalarField(g), z0, g, {5, 0.5}), ValidationError);
}

TEST(Cauchy, Antisymmetry) {
  Grid g(unit_cube(17));
  auto z0 = null_direction(frame_for({0.3, 1.0, 0.2}));
  CVec3 zm{-z0[0], -z0[1], -z0[2]};
  for (const auto& b : cgolab::testing::transform_bumps()) {
    auto f = ScalarField::sample(g, b);
    auto p = cauchy_transform(f, z0, g);
    auto m = cauchy_transform(f, zm, g);
    EXPECT_LT(max_abs(p + m), 1e-12 * max_abs(p));
  }
}

TEST(Cauchy, ForwardResidualOnTransversePlane) {
  auto z0 = null_direction(frame_for({0.3, 1.0, 0.2}));
  for (const auto& b : cgolab::testing::transform_bumps()) {
    double res = cgolab::testing::plane_forward_residual(b, b.box(), z0, b.center, 0.5, 65, 128, 0.25 / 64);
    EXPECT_LT(res, 1e-2);
  }
}

TEST(Cauchy, InvertsDerivativeOfCompactFunction) {
  // N^{-1}(zeta0 . grad phi) = phi for compactly supported phi.
  Frame fr = frame_for({1.0, -0.5, 0.25});
  auto z0 = null_direction(fr);
  const Vec3 c{0.5, 0.5, 0.5};
  const double R = 0.3;
  auto f = [&](const Vec3& x) {
    Vec3 gphi = phantom::ball_bump_gradient(x, c, R);
    cplx s = 0.0;
    for (int d = 0; d < 3; ++d) s += z0[d] * gphi[d];
    return s;
  };
  std::vector<Vec3> pts;
  for (int k = 0; k < 200; ++k) {
    double t = 0.0123 * k;
    pts.push_back({0.5 + 0.3 * std::sin(3 * t), 0.5 + 0.3 * std::cos(5 * t), 0.5 + 0.25 * std::sin(7 * t)});
  }
  auto phi = cauchy_transform_at(f, {{c[0] - R, c[1] - R, c[2] - R}, {c[0] + R, c[1] + R, c[2] + R}}, z0, pts, 128,
                                 0.002);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double ex = phantom::ball_bump(pts[i], c, R);
    num += std::norm(phi[i] - ex);
    den += ex * ex;
  }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
}

TEST(Cauchy, WeightedBoundStableUnderScaling) {
  // ||N^{-1} f||_{L2_delta} / ||f||_{L2_{delta+1}} with delta = -1/2 on dilated bumps.
  Frame fr = frame_for({0, 0, 1});
  auto z0 = null_direction(fr);
  std::vector<double> ratios;
  for (double R : {0.15, 0.3, 0.6}) {
    const Vec3 c{0, 0, 0};
    auto f = [&](const Vec3& x) { return cplx(phantom::ball_bump(x, c, R), 0.0); };
    SupportBox box{{-R, -R, -R}, {R, R, R}};
    // Tensor rule in (rho, theta, u): log-spaced rho, uniform theta, midpoint u.
    const int nr = 48, nth = 16, nu = 12;
    const double lr0 = std::log(1e-3 * R), lr1 = std::log(40.0), dl = (lr1 - lr0) / nr;
    std::vector<Vec3> pts;
    std::vector<double> wts;
    for (int iu = 0; iu < nu; ++iu)
      for (int ir = 0; ir < nr; ++ir)
        for (int it = 0; it < nth; ++it) {
          double u = -R + (iu + 0.5) * 2 * R / nu, rho = std::exp(lr0 + (ir + 0.5) * dl), th = 2 * std::numbers::pi * it / nth;
          Vec3 x{rho * std::cos(th), rho * std::sin(th), u};
          pts.push_back(x);
          double w = (2 * R / nu) * (rho * dl) * rho * (2 * std::numbers::pi / nth);
          wts.push_back(w / std::sqrt(1.0 + dot3(x, x)));
        }
    auto phi = cauchy_transform_at(f, box, z0, pts, 64, R / 40);
    double num = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) num += wts[i] * std::norm(phi[i]);
    double den = 0.0;
    const int m = 40;
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
          Vec3 x{-R + (i + 0.5) * 2 * R / m, -R + (j + 0.5) * 2 * R / m, -R + (k + 0.5) * 2 * R / m};
          den += std::pow(2 * R / m, 3) * std::sqrt(1.0 + dot3(x, x)) * std::norm(f(x));
        }
    ratios.push_back(std::sqrt(num / den));
  }
  for (double r : ratios) EXPECT_TRUE(std::isfinite(r));
  double lo = *std::min_element(ratios.begin(), ratios.end()), hi = *std::max_element(ratios.begin(), ratios.end());
  EXPECT_LT(hi / lo, 6.0);
}

TEST(CGOFrame, NullVectorsAndPairing) {
  phantom::Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    Vec3 xi{6 * rng.uniform() - 3, 6 * rng.uniform() - 3, 6 * rng.uniform() - 3};
    if (k == 0) xi = {2, 2, 0};
    Frame fr = frame_for(xi);
    EXPECT_NEAR(norm3(fr.mu1), 1.0, 1e-14);
    EXPECT_NEAR(norm3(fr.mu2), 1.0, 1e-14);
    EXPECT_NEAR(dot3(fr.mu1, fr.mu2), 0.0, 1e-14);
    EXPECT_NEAR(dot3(fr.mu1, xi), 0.0, 1e-13);
    EXPECT_NEAR(dot3(fr.mu2, xi), 0.0, 1e-13);
    double h = 0.9 * 2.0 / std::max(norm3(xi), 1.0);
    auto c1 = CGOContext::make(xi, fr, h, 1), c2 = CGOContext::make(xi, fr, h, -1);
    EXPECT_LT(std::abs(dot3(c1.zeta, c1.zeta)), 1e-12);
    EXPECT_LT(std::abs(dot3(c2.zeta, c2.zeta)), 1e-12);
    for (int d = 0; d < 3; ++d) EXPECT_LT(std::abs((c1.zeta[d] + c2.zeta[d]) / h - cplx(0, xi[d])), 1e-12);
    Vec3 re{c1.zeta0[0].real(), c1.zeta0[1].real(), c1.zeta0[2].real()};
    EXPECT_NEAR(norm3(re), 1.0, 1e-14);
  }
  EXPECT_THROW(CGOContext::make({10, 0, 0}, frame_for({1, 0, 0}), 0.5, 1), ValidationError);
  EXPECT_THROW(CGOContext::make({1, 0, 0}, frame_for({0, 1, 0}), 0.5, 1), ValidationError);
}

TEST(CGO, ZeroCoefficientsGiveExactExponential) {
  Grid g(unit_cube(13));
  auto co = OperatorCoefficients::laplace(g);
  auto ctx = CGOContext::make({3, 1, 0}, frame_for({3, 1, 0}), 0.3, 1);
  auto s = build_cgo(co, ctx);
  EXPECT_EQ(max_abs(s.phase), 0.0);
  EXPECT_EQ(max_abs(s.r), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(s.a[i], cplx(1.0, 0.0));
  EXPECT_EQ(s.diag.pde_residual, 0.0);
  // e^{x.zeta/h} is harmonic: zeta . zeta = 0.
  EXPECT_LT(std::abs(dot3(ctx.zeta, ctx.zeta)), 1e-14);
}

TEST(CGO, GradientDriftTransportOracle) {
  // V = grad psi gives zeta0 . V_tau = zeta0 . grad psi_tau, so the phase is psi_tau / 2.
  Grid g(unit_cube(33));
  const Vec3 c{0.5, 0.5, 0.5};
  auto psi = ScalarField::sample(g, [&](const Vec3& x) { return cplx(phantom::ball_bump(x, c, 0.3), 0); });
  auto V = VectorField::sample(g, [&](const Vec3& x) { return to_complex(phantom::ball_bump_gradient(x, c, 0.3)); });
  auto z0 = null_direction(frame_for({0, 1, 1}));
  const double tau = 0.1;
  MollifiedDrift m(V, tau);
  auto phase = transport_phase(m, z0, g, {128, 0.25});
  EXPECT_LT(transport_residual(phase, m.on(g), z0), 1e-2);
  auto psi_tau = restrict_to(mollify(extend_to_ball(psi, m.ext), {tau}), m.ext, g);
  psi_tau *= 0.5;
  EXPECT_LT(l2_norm(phase - psi_tau), 2e-2 * l2_norm(psi_tau));
}

TEST(CGO, PhaseNormsAcrossMollifierWidths) {
  Grid g(unit_cube(33));
  auto V = VectorField::sample(g, [](const Vec3& x) {
    return CVec3{phantom::gaussian(x, {0.5, 0.5, 0.5}, 0.12), cplx(0, 0.5) * phantom::gaussian(x, {0.45, 0.5, 0.5}, 0.1), 0.0};
  });
  auto z0 = null_direction(frame_for({0, 0, 1}));
  std::vector<double> taus{0.2, 0.1, 0.05}, ginf, gl2;
  for (double tau : taus) {
    MollifiedDrift m(V, tau);
    auto gp = gradient(transport_phase(m, z0, g));
    ginf.push_back(max_abs(gp));
    gl2.push_back(l2_norm(gp));
  }
  // ||grad Phi||_inf = O(1/tau), ||grad Phi||_2 = O(1).
  for (std::size_t i = 0; i < taus.size(); ++i) EXPECT_LT(ginf[i] * taus[i], ginf[0] * taus[0] * 1.05);
  EXPECT_NEAR(loglog_slope(taus, gl2), 0.0, 0.3);
}

TEST(CGO, AmplitudeNorms) {
  // ||a||_inf = O(1), ||grad a||_inf = O(h^{-1/2}), ||Lap a||_2 = o(h^{-1/2}) with tau = h^{1/2}.
  Grid g(unit_cube(25));
  auto co = smooth_magnetic(g);
  auto z0 = null_direction(frame_for({1, 0, 0}));
  std::vector<double> ainf, ga, la;
  for (double h : {0.1, 0.05, 0.025}) {
    MollifiedDrift m(co.V, std::sqrt(h));
    auto a = exp(transport_phase(m, z0, g));
    ainf.push_back(max_abs(a));
    ga.push_back(max_abs(gradient(a)) * std::sqrt(h));
    la.push_back(l2_norm(laplacian(a)) * std::sqrt(h));
  }
  for (double v : ainf) EXPECT_LT(v, 2.0 * ainf[0]);
  EXPECT_TRUE(strictly_decreasing(ga));
  EXPECT_TRUE(strictly_decreasing(la));
}

TEST(CGO, PhaseCancellationForTransposedPair) {
  Grid g(unit_cube(17));
  auto co = smooth_magnetic(g);
  // For u2 the drift is V = 2iA and the direction is -zeta0.
  VectorField A(g);
  for (int d = 0; d < 3; ++d) A.set_component(d, co.V.component(d) * cplx(0, 0.5));
  auto co2 = OperatorCoefficients::magnetic_transpose(A, ScalarField(g));
  Frame fr = frame_for({2, 0, 1});
  auto c1 = CGOContext::make({2, 0, 1}, fr, 0.3, 1), c2 = CGOContext::make({2, 0, 1}, fr, 0.3, -1);
  MollifiedDrift m1(co.V, 0.3), m2(co2.V, 0.3);
  auto p1 = transport_phase(m1, c1.zeta0, g), p2 = transport_phase(m2, c2.zeta0, g);
  EXPECT_LT(max_abs(p1 + p2), 1e-12 * max_abs(p1));
}

TEST(CGO, RemainderContractOnLadder) {
  Grid g(unit_cube(17));
  auto co = smooth_magnetic(g);
  std::vector<double> hs{0.4, 0.2, 0.1}, pde, rr;
  for (double h : hs) {
    auto ctx = CGOContext::make({4, 0, 0}, frame_for({1, 0, 0}), h, 1);
    auto s = build_cgo(co, ctx);
    EXPECT_LT(s.diag.solve_residual, 1e-9);
    EXPECT_NEAR(s.diag.tau, std::sqrt(h), 1e-15);
    for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(s.a[i], std::exp(s.phase[i]));
    pde.push_back(s.diag.pde_residual);
    rr.push_back(s.diag.r_h1scl / std::sqrt(h));
  }
  EXPECT_TRUE(strictly_decreasing(pde));
  EXPECT_TRUE(strictly_decreasing(rr));
}

TEST(CGO, DirichletRemainderSolvesSameEquation) {
  Grid g(unit_cube(13));
  auto co = smooth_magnetic(g);
  auto ctx = CGOContext::make({2, 0, 0}, frame_for({1, 0, 0}), 0.3, -1);
  CGOOptions opt;
  opt.remainder = RemainderSolve::ZeroDirichlet;
  auto s = build_cgo(co, ctx, opt);
  EXPECT_LT(s.diag.solve_residual, 1e-9);
  for (auto idx : g.boundary_nodes()) EXPECT_EQ(s.r[idx], cplx(0.0, 0.0));
  auto sm = build_cgo(co, ctx);
  EXPECT_LE(l2_norm(sm.r), l2_norm(s.r) * (1 + 1e-9));
}

TEST(CGO, DiagnosticsCsv) {
  Grid g(unit_cube(9));
  auto co = smooth_magnetic(g);
  auto s = build_cgo(co, CGOContext::make({1, 0, 0}, frame_for({1, 0, 0}), 0.4, 1));
  std::string path = ::testing::TempDir() + "cgo_diag.csv";
  write_diagnostics_csv(path, {s.diag});
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header.rfind("h,tau,transport_residual,pde_residual,solve_residual,r_h1scl", 0), 0u);
  EXPECT_FALSE(row.empty());
  std::remove(path.c_str());
}
