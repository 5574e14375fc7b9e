#pragma once

#include <numbers>

#include "mollify.hpp"

namespace cgolab {

enum class Interpolation { Linear, Cubic };

struct CauchyOptions {
  int n_theta = 32;          // even, so that opposite directions share nodes
  double radial_step = 1.0;  // in units of the smallest source spacing
  Interpolation interpolation = Interpolation::Cubic;

  void validate() const {
    if (n_theta < 4 || n_theta % 2 != 0) throw ValidationError("Cauchy transform: angular node count must be even and >= 4");
    if (!(radial_step > 0.0)) throw ValidationError("Cauchy transform: radial step must be positive");
  }
};

// Checks that zeta0 = e1 + i e2 with e1, e2 orthonormal.
inline void check_null_direction(const CVec3& zeta0) {
  Vec3 a{zeta0[0].real(), zeta0[1].real(), zeta0[2].real()}, b{zeta0[0].imag(), zeta0[1].imag(), zeta0[2].imag()};
  if (std::abs(dot3(a, a) - 1.0) > 1e-9 || std::abs(dot3(b, b) - 1.0) > 1e-9 || std::abs(dot3(a, b)) > 1e-9)
    throw ValidationError("Cauchy transform: direction must be e1 + i e2 with orthonormal e1, e2");
}

// Axis-aligned box containing the support of the integrand.
struct SupportBox {
  Vec3 lower{}, upper{};
};

namespace detail {

struct CauchyRule {
  std::vector<Vec3> dirs;
  std::vector<cplx> phase;
  double dr = 0.0;
};

inline CauchyRule cauchy_rule(const CVec3& zeta0, int n_theta, double dr) {
  const Vec3 e1{zeta0[0].real(), zeta0[1].real(), zeta0[2].real()};
  const Vec3 e2{zeta0[0].imag(), zeta0[1].imag(), zeta0[2].imag()};
  CauchyRule rule{std::vector<Vec3>(n_theta), std::vector<cplx>(n_theta), dr};
  for (int k = 0; k < n_theta; ++k) {
    double th = 2.0 * std::numbers::pi * k / n_theta;
    for (int d = 0; d < 3; ++d) rule.dirs[k][d] = std::cos(th) * e1[d] + std::sin(th) * e2[d];
    rule.phase[k] = std::polar(1.0, -th);
  }
  return rule;
}

// Polar quadrature centred at x: midpoint rule in r along each ray, trapezoid rule in theta.
// The O(dr^2) endpoint term of the midpoint rule at r = 0 is removed with the Euler-Maclaurin
// correction (dr^2 / 24) w . grad f(x).
template <class Sampler>
cplx cauchy_at(const Sampler& f, const SupportBox& box, const CauchyRule& rule, const Vec3& x) {
  const int nt = static_cast<int>(rule.dirs.size());
  const double dr = rule.dr;
  bool inside = true;
  for (int d = 0; d < 3; ++d) inside = inside && x[d] >= box.lower[d] && x[d] <= box.upper[d];
  std::array<cplx, 3> grad{};
  if (inside)
    for (int d = 0; d < 3; ++d) {
      Vec3 xp = x, xm = x;
      xp[d] += dr;
      xm[d] -= dr;
      grad[d] = (f(xp) - f(xm)) / (2.0 * dr);
    }
  cplx total = 0.0;
  for (int k = 0; k < nt; ++k) {
    const Vec3& w = rule.dirs[k];
    double rin = 0.0, rout = std::numeric_limits<double>::infinity();
    bool empty = false;
    for (int d = 0; d < 3 && !empty; ++d) {
      if (std::abs(w[d]) < 1e-14) {
        if (x[d] < box.lower[d] || x[d] > box.upper[d]) empty = true;
        continue;
      }
      double r1 = (x[d] - box.lower[d]) / w[d], r2 = (x[d] - box.upper[d]) / w[d];
      if (r1 > r2) std::swap(r1, r2);
      rin = std::max(rin, r1);
      rout = std::min(rout, r2);
    }
    if (inside) total += rule.phase[k] * (dr / 24.0) * (w[0] * grad[0] + w[1] * grad[1] + w[2] * grad[2]);
    if (empty || rout <= rin) continue;
    long j0 = std::max(static_cast<long>(std::floor(rin / dr - 0.5)), 0L);
    long j1 = static_cast<long>(std::ceil(rout / dr - 0.5));
    cplx line = 0.0;
    for (long j = j0; j <= j1; ++j) {
      double r = (j + 0.5) * dr;
      line += f(Vec3{x[0] - r * w[0], x[1] - r * w[1], x[2] - r * w[2]});
    }
    total += rule.phase[k] * line;
  }
  return total * (dr / nt);
}

}  // namespace detail

// Inverse of zeta0 . grad applied to a function supported in `box`, at arbitrary points:
//   (1/2pi) int_0^{2pi} e^{-i theta} int_0^inf f(x - r (cos theta e1 + sin theta e2)) dr dtheta.
// `step` is the radial step in absolute units.
template <class Sampler>
std::vector<cplx> cauchy_transform_at(const Sampler& f, const SupportBox& box, const CVec3& zeta0,
                                      const std::vector<Vec3>& points, int n_theta, double step) {
  CauchyOptions{n_theta, 1.0}.validate();
  if (!(step > 0.0)) throw ValidationError("Cauchy transform: radial step must be positive");
  check_null_direction(zeta0);
  const auto rule = detail::cauchy_rule(zeta0, n_theta, step);
  std::vector<cplx> out(points.size());
  for (std::size_t t = 0; t < points.size(); ++t) out[t] = detail::cauchy_at(f, box, rule, points[t]);
  return out;
}

// Grid version: f is interpolated between nodes and taken as zero outside its grid.
inline ScalarField cauchy_transform(const ScalarField& f, const CVec3& zeta0, const Grid& targets,
                                    const CauchyOptions& opt = {}) {
  opt.validate();
  check_null_direction(zeta0);
  const Grid& g = f.grid();

  // Bounding box of the support, padded by one cell.
  std::array<int, 3> lo{g.n(0), g.n(1), g.n(2)}, hi{-1, -1, -1};
  for (std::size_t idx = 0; idx < g.size(); ++idx)
    if (f[idx] != 0.0) {
      auto c = g.ijk(idx);
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], c[d]);
        hi[d] = std::max(hi[d], c[d]);
      }
    }
  ScalarField out(targets);
  if (hi[0] < 0) return out;
  SupportBox box;
  for (int d = 0; d < 3; ++d) {
    box.lower[d] = g.coord(d, std::max(lo[d] - 1, 0));
    box.upper[d] = g.coord(d, std::min(hi[d] + 1, g.n(d) - 1));
  }
  const double dr = opt.radial_step * std::min(g.spacing(0), std::min(g.spacing(1), g.spacing(2)));
  const auto rule = detail::cauchy_rule(zeta0, opt.n_theta, dr);
  if (opt.interpolation == Interpolation::Cubic) {
    auto sampler = [&](const Vec3& y) { return interpolate_cubic(f, y); };
    for (std::size_t t = 0; t < targets.size(); ++t) out[t] = detail::cauchy_at(sampler, box, rule, targets.point(t));
  } else {
    auto sampler = [&](const Vec3& y) { return interpolate(f, y); };
    for (std::size_t t = 0; t < targets.size(); ++t) out[t] = detail::cauchy_at(sampler, box, rule, targets.point(t));
  }
  return out;
}

}  // namespace cgolab
