#include <gtest/gtest.h>

#include <chrono>
#include <numbers>

#include "cgolab/forward.hpp"
#include "cgolab/phantom.hpp"

using namespace cgolab;

namespace {

struct Coeffs {
  VectorField A;
  ScalarField q;
};

Coeffs random_smooth(const Grid& g, std::uint64_t seed) {
  phantom::Rng rng(seed);
  auto bumps = phantom::random_bumps(rng, g.spec(), 3, 0.2, 0.3, 0.8, true, 0.05);
  auto qb = phantom::random_bumps(rng, g.spec(), 2, 0.2, 0.3, 0.6, true, 0.05);
  Coeffs c{VectorField(g), ScalarField(g)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 x = g.point(i);
    cplx b = bumps.value(x);
    c.A.set(i, {b, 0.5 * b * x[2], cplx(0.3, 0.1) * b});
    c.q[i] = qb.value(x) + 1.0;
  }
  return c;
}

// Lowest discrete Dirichlet eigenvalue of the seven-point Laplacian on the box.
double lowest_dirichlet_eigenvalue(const Grid& g) {
  double lam = 0.0;
  for (int d = 0; d < 3; ++d) {
    double h = g.spacing(d), L = g.spec().upper[d] - g.spec().lower[d];
    lam += 2.0 / (h * h) * (1.0 - std::cos(std::numbers::pi * h / L));
  }
  return lam;
}

}  // namespace

TEST(Forward, MultifrontalMatchesColumnSolves) {
  Grid g(make_domain({0, 0, 0}, {1, 1.2, 0.9}, {9, 10, 8}));
  auto c = random_smooth(g, 11);
  auto co = OperatorCoefficients::magnetic(c.A, c.q);
  auto a = assemble_dtn(co, DtNMethod::Multifrontal);
  auto b = assemble_dtn(co, DtNMethod::ColumnSolves);
  EXPECT_LT(dtn_distance(a, b), 1e-10);
}

TEST(Forward, LaplaceDtNIsSymmetricAndKillsConstants) {
  Grid g(unit_cube(9));
  auto d = assemble_dtn(OperatorCoefficients::laplace(g));
  EXPECT_LT((d.matrix - d.matrix.transpose()).norm(), 1e-10 * d.matrix.norm());
  std::vector<cplx> one(d.nodes.size(), 1.0);
  EXPECT_LT(vec_norm(d.apply(one)), 1e-10 * d.matrix.norm());
}

TEST(Forward, PairingIndependentOfExtension) {
  Grid g(unit_cube(9));
  auto c = random_smooth(g, 3);
  auto co = OperatorCoefficients::magnetic(c.A, c.q);
  auto dtn = assemble_dtn(co);
  SpMat K = assemble_bilinear_form(co);
  phantom::Rng rng(4);
  auto f = BoundaryFunction::sample(g, [](const Vec3& x) { return cplx(std::cos(3 * x[0]) + x[1], x[2]); });
  auto gb = BoundaryFunction::sample(g, [](const Vec3& x) { return cplx(x[0] * x[1], std::sin(x[2])); });
  auto u = solve_dirichlet(co, f);
  for (int trial = 0; trial < 3; ++trial) {
    ScalarField v(g);
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = cplx(rng.uniform(-5, 5), rng.uniform(-5, 5));
    for (std::size_t b = 0; b < gb.nodes.size(); ++b) v[gb.nodes[b]] = gb.values[b];
    cplx weak = bilinear_form(K, u, v);
    cplx direct = dtn.pairing(gb.values, f.values);
    EXPECT_LT(std::abs(weak - direct), 1e-9 * std::abs(direct));
  }
}

TEST(Forward, ManufacturedSolutionConvergesAtSecondOrder) {
  auto run = [](int n) {
    Grid g(unit_cube(n));
    auto uex = [](const Vec3& x) { return std::exp(cplx(0.5 * x[2], x[0])) * std::cos(x[1]); };
    VectorField A = VectorField::sample(g, [](const Vec3& x) { return CVec3{x[1], cplx(0, 0.3), 0.2 * x[0]}; });
    ScalarField q = ScalarField::sample(g, [](const Vec3& x) { return cplx(1.0 + x[0], 0.5); });
    // L u = -Lap u - 2i A.grad u + q u for the closed form above.
    auto src = ScalarField::sample(g, [&](const Vec3& x) {
      cplx u = uex(x);
      cplx ux = cplx(0, 1) * u, uy = -std::exp(cplx(0.5 * x[2], x[0])) * std::sin(x[1]), uz = 0.5 * u;
      cplx lap = -u - u + 0.25 * u;
      CVec3 a{x[1], cplx(0, 0.3), 0.2 * x[0]};
      return -lap - 2.0 * cplx(0, 1) * (a[0] * ux + a[1] * uy + a[2] * uz) + cplx(1.0 + x[0], 0.5) * u;
    });
    auto co = OperatorCoefficients::magnetic(A, q);
    auto f = BoundaryFunction::sample(g, uex);
    auto u = solve_dirichlet(co, f, &src);
    return max_abs(u - ScalarField::sample(g, uex));
  };
  double e1 = run(9), e2 = run(17);
  EXPECT_LT(e2, 1e-3);
  EXPECT_GT(e1 / e2, 3.5);
}

TEST(Forward, ScreenFlagsDirichletEigenvalue) {
  Grid g(unit_cube(9));
  auto ok = screen_assumption_A(OperatorCoefficients::laplace(g));
  EXPECT_FALSE(ok.suspect);
  // Smallest eigenvalue of the discrete Laplacian in closed form.
  EXPECT_NEAR(ok.sigma_min, lowest_dirichlet_eigenvalue(g), 1e-6 * ok.sigma_min);
  auto co = OperatorCoefficients::laplace(g);
  co.q = ScalarField(g, -lowest_dirichlet_eigenvalue(g));
  auto bad = screen_assumption_A(co);
  EXPECT_TRUE(bad.suspect);
  EXPECT_THROW(assemble_dtn(co), AssumptionViolation);
}

TEST(Forward, GaugeInvarianceImprovesWithRefinement) {
  auto gap = [](int n) {
    Grid g(unit_cube(n));
    auto c = random_smooth(g, 21);
    auto phi = ScalarField::sample(g, [&](const Vec3& x) { return cplx(0.8 * phantom::box_sin4(x, g.spec()), 0.0); });
    auto [A2, q2] = apply_gauge(c.A, c.q, phi);
    return dtn_distance(assemble_dtn(c.A, c.q), assemble_dtn(A2, q2));
  };
  double d1 = gap(9), d2 = gap(13);
  EXPECT_LT(d2, d1);
}

TEST(Forward, RejectsMismatchedData) {
  Grid g(unit_cube(7)), h(unit_cube(9));
  auto f = BoundaryFunction::sample(h, [](const Vec3&) { return cplx(1.0); });
  EXPECT_THROW(solve_dirichlet(OperatorCoefficients::laplace(g), f), ValidationError);
}
