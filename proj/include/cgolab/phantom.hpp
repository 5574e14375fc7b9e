#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "fluid.hpp"

namespace cgolab::phantom {

// exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside. Equals 1 at s = 0.
inline double bump(double s) {
  double t = 1.0 - s * s;
  return t > 0.0 ? std::exp(1.0 - 1.0 / t) : 0.0;
}

// Derivative of bump with respect to s.
inline double bump_prime(double s) {
  double t = 1.0 - s * s;
  return t > 0.0 ? bump(s) * (-2.0 * s / (t * t)) : 0.0;
}

inline double dist(const Vec3& x, const Vec3& c) {
  return std::sqrt((x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]) + (x[2] - c[2]) * (x[2] - c[2]));
}

inline double ball_bump(const Vec3& x, const Vec3& center, double radius) { return bump(dist(x, center) / radius); }

inline Vec3 ball_bump_gradient(const Vec3& x, const Vec3& center, double radius) {
  double r = dist(x, center);
  if (r == 0.0 || r >= radius) return {0, 0, 0};
  double f = bump_prime(r / radius) / (radius * r);
  return {f * (x[0] - center[0]), f * (x[1] - center[1]), f * (x[2] - center[2])};
}

// (1 - |x - c|^2 / R^2)^4 inside the ball: C^3 with moderate derivatives, so second-order
// differences resolve it on coarse grids.
inline double poly_bump(const Vec3& x, const Vec3& center, double radius) {
  double r2 = 0.0;
  for (int d = 0; d < 3; ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
  double t = 1.0 - r2 / (radius * radius);
  return t > 0.0 ? t * t * t * t : 0.0;
}

inline Vec3 poly_bump_gradient(const Vec3& x, const Vec3& center, double radius) {
  double r2 = 0.0;
  for (int d = 0; d < 3; ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
  double t = 1.0 - r2 / (radius * radius);
  if (t <= 0.0) return {0, 0, 0};
  double f = -8.0 * t * t * t / (radius * radius);
  return {f * (x[0] - center[0]), f * (x[1] - center[1]), f * (x[2] - center[2])};
}

// Product of sin^4 over the axes of a box: a trigonometric polynomial that vanishes to
// third order on every face.
inline double box_sin4(const Vec3& x, const DomainSpec& d) {
  double p = 1.0;
  for (int a = 0; a < 3; ++a) {
    double s = std::sin(std::numbers::pi * (x[a] - d.lower[a]) / (d.upper[a] - d.lower[a]));
    p *= s * s * s * s;
  }
  return p;
}

inline Vec3 box_sin4_gradient(const Vec3& x, const DomainSpec& d) {
  std::array<double, 3> s{}, ds{};
  for (int a = 0; a < 3; ++a) {
    double L = d.upper[a] - d.lower[a];
    double t = std::numbers::pi * (x[a] - d.lower[a]) / L;
    s[a] = std::pow(std::sin(t), 4);
    ds[a] = 4.0 * std::pow(std::sin(t), 3) * std::cos(t) * std::numbers::pi / L;
  }
  return {ds[0] * s[1] * s[2], s[0] * ds[1] * s[2], s[0] * s[1] * ds[2]};
}

// Product of sin^2 over the axes: vanishes on every face, first derivative does not.
inline double box_sin2(const Vec3& x, const DomainSpec& d) {
  double p = 1.0;
  for (int a = 0; a < 3; ++a) {
    double s = std::sin(std::numbers::pi * (x[a] - d.lower[a]) / (d.upper[a] - d.lower[a]));
    p *= s * s;
  }
  return p;
}

inline Vec3 box_sin2_gradient(const Vec3& x, const DomainSpec& d) {
  std::array<double, 3> s{}, ds{};
  for (int a = 0; a < 3; ++a) {
    double L = d.upper[a] - d.lower[a];
    double t = std::numbers::pi * (x[a] - d.lower[a]) / L;
    s[a] = std::sin(t) * std::sin(t);
    ds[a] = std::sin(2.0 * t) * std::numbers::pi / L;
  }
  return {ds[0] * s[1] * s[2], s[0] * ds[1] * s[2], s[0] * s[1] * ds[2]};
}

inline double gaussian(const Vec3& x, const Vec3& center, double width) {
  double r = dist(x, center);
  return std::exp(-r * r / (2.0 * width * width));
}

// Deterministic uniform numbers in [0, 1) independent of the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

 private:
  std::mt19937_64 eng_;
};

// Sum of a few ball bumps with random centers, radii and complex amplitudes, all supported
// at least `margin` away from the faces.
struct BumpSum {
  struct Term {
    Vec3 center;
    double radius;
    cplx amp;
  };
  std::vector<Term> terms;

  double real_value(const Vec3& x) const {
    double s = 0.0;
    for (auto& t : terms) s += t.amp.real() * ball_bump(x, t.center, t.radius);
    return s;
  }
  cplx value(const Vec3& x) const {
    cplx s = 0.0;
    for (auto& t : terms) s += t.amp * ball_bump(x, t.center, t.radius);
    return s;
  }
  CVec3 gradient(const Vec3& x) const {
    CVec3 g{0.0, 0.0, 0.0};
    for (auto& t : terms) {
      auto b = ball_bump_gradient(x, t.center, t.radius);
      for (int d = 0; d < 3; ++d) g[d] += t.amp * b[d];
    }
    return g;
  }
};

inline BumpSum random_bumps(Rng& rng, const DomainSpec& dom, int count, double rmin, double rmax, double amp,
                            bool complex_amp, double margin) {
  BumpSum s;
  for (int i = 0; i < count; ++i) {
    double r = rng.uniform(rmin, rmax);
    Vec3 c{};
    for (int d = 0; d < 3; ++d) {
      double lo = dom.lower[d] + margin + r, hi = dom.upper[d] - margin - r;
      c[d] = hi > lo ? rng.uniform(lo, hi) : 0.5 * (dom.lower[d] + dom.upper[d]);
    }
    cplx a = amp * rng.uniform(-1.0, 1.0);
    if (complex_amp) a += cplx(0, amp * rng.uniform(-1.0, 1.0));
    s.terms.push_back({c, r, a});
  }
  return s;
}

// Constant fluid with optional smooth perturbations.
inline FluidParameters constant_fluid(const Grid& g, double c, Vec3 v, double rho, double alpha0, double zeta) {
  FluidParameters p{ScalarField(g, c), VectorField(g), ScalarField(g, rho), ScalarField(g, alpha0), ScalarField(g, zeta)};
  for (int d = 0; d < 3; ++d) std::fill(p.v.comp(d).begin(), p.v.comp(d).end(), cplx(v[d], 0.0));
  return p;
}

// Smooth fluid: Gaussian bumps in c, rho, a swirl in v and a bump in alpha0.
inline FluidParameters smooth_fluid(const Grid& g, double alpha_amp = 0.0, double zeta = 0.5) {
  const Vec3 c0 = g.spec().center();
  FluidParameters p = constant_fluid(g, 1.0, {0, 0, 0}, 1.0, 0.0, zeta);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 x = g.point(i);
    p.c[i] = 1.0 + 0.2 * gaussian(x, {c0[0] + 0.1, c0[1], c0[2]}, 0.2);
    p.rho[i] = 1.0 + 0.3 * gaussian(x, {c0[0], c0[1] - 0.1, c0[2]}, 0.25);
    double b = gaussian(x, c0, 0.25);
    p.v.comp(0)[i] = -0.3 * (x[1] - c0[1]) * b;
    p.v.comp(1)[i] = 0.3 * (x[0] - c0[0]) * b + 0.05;
    p.v.comp(2)[i] = 0.1 * b;
    p.alpha0[i] = alpha_amp * (1.0 + 0.5 * gaussian(x, {c0[0], c0[1], c0[2] + 0.1}, 0.2));
  }
  return p;
}

// Two-layer fluid with a smoothed interface at z = z0.
inline FluidParameters tanh_interface_fluid(const Grid& g, double z0, double width) {
  FluidParameters p = constant_fluid(g, 1.0, {0, 0, 0}, 1.0, 0.0, 0.5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = std::tanh((g.point(i)[2] - z0) / width);
    p.c[i] = 1.0 + 0.25 * (1.0 + s);
    p.rho[i] = 1.0 + 0.5 * (1.0 + s);
  }
  return p;
}

// Smooth complex magnetic potential that does not vanish on the boundary, with a positive q.
inline CVec3 trace_field(const Vec3& x) {
  const double pi = std::numbers::pi;
  return {cplx(0.6 + 0.2 * std::sin(pi * x[0]) * x[1], 0.0),
          cplx(-0.3 + 0.25 * std::cos(pi * x[1]) * x[2], 0.2 * x[0]),
          cplx(0.4 + 0.2 * x[0] * x[2] + 0.1 * x[1], 0.0)};
}

inline std::pair<VectorField, ScalarField> trace_pair(const Grid& g) {
  VectorField A(g);
  ScalarField q(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 x = g.point(i);
    auto a = trace_field(x);
    for (int d = 0; d < 3; ++d) A.comp(d)[i] = a[d];
    q[i] = 1.0 + x[0];
  }
  return {std::move(A), std::move(q)};
}

}  // namespace cgolab::phantom
