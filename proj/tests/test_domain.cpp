#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cgolab/field_io.hpp"
#include "cgolab/ops.hpp"
#include "cgolab/phantom.hpp"

using namespace cgolab;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cgolab_test_" + name)).string();
}

ScalarField random_field(const Grid& g, std::uint64_t seed) {
  phantom::Rng rng(seed);
  ScalarField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
  return f;
}

}  // namespace

TEST(Grid, IndexRoundTripAndBoundaryCount) {
  Grid g(make_domain({0, -1, 2}, {1, 1, 3}, {7, 9, 6}));
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.ijk(i);
    EXPECT_EQ(g.index(c[0], c[1], c[2]), i);
  }
  EXPECT_EQ(g.boundary_nodes().size(), g.size() - 5u * 7u * 4u);
  EXPECT_DOUBLE_EQ(g.spacing(1), 0.25);
}

TEST(Grid, DomainValidation) {
  auto d = unit_cube(9);
  EXPECT_NO_THROW(d.validate());
  d.ball_radius = 0.5;
  EXPECT_THROW(d.validate(), ValidationError);
  auto e = unit_cube(4);
  EXPECT_THROW(e.validate(), ValidationError);
  auto f = make_domain({0, 0, 0}, {1, 0, 1}, {9, 9, 9});
  EXPECT_THROW(f.validate(), ValidationError);
}

TEST(Quadrature, ExactForTrilinearAndPeriodicModes) {
  Grid g(make_domain({0, 0, 0}, {1, 2, 0.5}, {9, 11, 7}));
  auto lin = ScalarField::sample(g, [](const Vec3& x) { return cplx(1.0 + 2 * x[0] - x[1] + 3 * x[2] + x[0] * x[1] * x[2]); });
  // Integral over [0,1]x[0,2]x[0,0.5] of the polynomial.
  double vol = 1.0;
  double exact = vol + 2 * 0.5 - 1.0 + 3 * 0.25 + 0.5 * 1.0 * 0.25;
  EXPECT_NEAR(integrate(lin).real(), exact, 1e-13);
  // The trapezoid rule on a full period integrates exp(2 pi i k x) exactly.
  Grid u(unit_cube(13));
  auto wave = ScalarField::sample(u, [](const Vec3& x) {
    return std::exp(cplx(0, 2 * std::numbers::pi * (x[0] + 2 * x[1] - x[2])));
  });
  EXPECT_LT(std::abs(integrate(wave)), 1e-14);
}

TEST(Differences, GradientExactForQuadratics) {
  Grid g(make_domain({-0.5, 0, 0}, {0.5, 1, 2}, {7, 8, 9}));
  auto f = ScalarField::sample(g, [](const Vec3& x) { return cplx(x[0] * x[0] + x[1] * x[2] - 3 * x[2] * x[2], x[0] * x[1]); });
  auto grad = gradient(f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 x = g.point(i);
    EXPECT_NEAR(std::abs(grad.comp(0)[i] - cplx(2 * x[0], x[1])), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(grad.comp(1)[i] - cplx(x[2], x[0])), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(grad.comp(2)[i] - cplx(x[1] - 6 * x[2], 0)), 0.0, 1e-12);
  }
}

TEST(Differences, LaplacianExactForCubics) {
  Grid g(unit_cube(7));
  auto f = ScalarField::sample(g, [](const Vec3& x) { return cplx(x[0] * x[0] * x[0] + x[1] * x[1] * x[2] - x[2] * x[2]); });
  auto lap = laplacian(f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 x = g.point(i);
    EXPECT_NEAR(std::abs(lap[i] - cplx(6 * x[0] + 2 * x[2] - 2)), 0.0, 1e-10);
  }
}

TEST(Differences, CurlOfGradientVanishes) {
  Grid g(make_domain({0, 0, 0}, {1, 1.5, 0.75}, {9, 10, 11}));
  auto f = random_field(g, 7);
  auto w = curl(gradient(f));
  EXPECT_LT(l2_norm(w), 1e-11 * l2_norm(gradient(f)));
}

TEST(Differences, SecondOrderConvergence) {
  auto err = [](int n) {
    Grid g(unit_cube(n));
    auto f = ScalarField::sample(g, [](const Vec3& x) { return cplx(std::sin(2 * x[0]) * std::cos(x[1]) * std::exp(x[2])); });
    auto lap = laplacian(f);
    auto diff = lap - ScalarField::sample(g, [](const Vec3& x) {
                  return cplx(-4 * std::sin(2 * x[0]) * std::cos(x[1]) * std::exp(x[2]));
                });
    return max_abs(diff);
  };
  double e1 = err(9), e2 = err(17);
  EXPECT_GT(e1 / e2, 3.0);
}

TEST(FieldIo, RoundTripIsBitExact) {
  Grid g(make_domain({0, 0, 0}, {1, 2, 3}, {5, 6, 7}));
  auto s = random_field(g, 1);
  auto path = tmp_path("scalar.cgof");
  io::write_field(path, s);
  auto s2 = io::read_scalar(path);
  ASSERT_EQ(s2.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], s2[i]);
  EXPECT_EQ(s2.grid().spec().upper, g.spec().upper);

  VectorField v(random_field(g, 2), random_field(g, 3), random_field(g, 4));
  io::write_field(path, v);
  auto v2 = io::read_vector(path);
  for (int d = 0; d < 3; ++d) EXPECT_EQ(v.comp(d), v2.comp(d));

  auto w = curl(v);
  io::write_field(path, w);
  auto w2 = io::read_two_form(path);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(w.comp(c), w2.comp(c));

  io::BoundaryMatrix m{g, g.boundary_nodes(), {}};
  phantom::Rng rng(5);
  m.entries.resize(m.nodes.size() * m.nodes.size());
  for (auto& z : m.entries) z = cplx(rng.uniform(), rng.uniform());
  io::write_matrix(path, m);
  auto m2 = io::read_matrix(path);
  EXPECT_EQ(m2.nodes, m.nodes);
  EXPECT_EQ(m2.entries, m.entries);
  std::remove(path.c_str());
}

TEST(FieldIo, RejectsCorruptFiles) {
  Grid g(unit_cube(5));
  auto path = tmp_path("bad.cgof");
  io::write_field(path, random_field(g, 9));
  EXPECT_THROW(io::read_vector(path), FormatError);
  {
    std::ifstream is(path, std::ios::binary);
    std::vector<char> b((std::istreambuf_iterator<char>(is)), {});
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(b.data(), static_cast<std::streamsize>(b.size() - 10));
  }
  EXPECT_THROW(io::read_scalar(path), FormatError);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOPE and some bytes";
  }
  EXPECT_THROW(io::read_scalar(path), FormatError);
  EXPECT_THROW(io::read_scalar(tmp_path("missing.cgof")), IoError);
  std::remove(path.c_str());
}
