#pragma once

#include <cmath>

#include "field.hpp"

namespace cgolab {

// One-dimensional difference weights: value at node c is sum w[m] f[c + off[m]].
struct Stencil1D {
  int count = 0;
  std::array<int, 4> off{};
  std::array<double, 4> w{};
};

// Centered in the interior, second-order one-sided at the two ends.
inline Stencil1D first_derivative_stencil(int c, int n, double h) {
  Stencil1D s;
  if (c == 0) {
    s.count = 3;
    s.off = {0, 1, 2, 0};
    s.w = {-1.5 / h, 2.0 / h, -0.5 / h, 0};
  } else if (c == n - 1) {
    s.count = 3;
    s.off = {0, -1, -2, 0};
    s.w = {1.5 / h, -2.0 / h, 0.5 / h, 0};
  } else {
    s.count = 2;
    s.off = {1, -1, 0, 0};
    s.w = {0.5 / h, -0.5 / h, 0, 0};
  }
  return s;
}

// Fourth-order centered where two neighbours exist on each side, otherwise as above.
inline Stencil1D fourth_order_first_derivative_stencil(int c, int n, double h) {
  if (c < 2 || c > n - 3) return first_derivative_stencil(c, n, h);
  Stencil1D s;
  s.count = 4;
  s.off = {1, -1, 2, -2};
  s.w = {8.0 / (12.0 * h), -8.0 / (12.0 * h), -1.0 / (12.0 * h), 1.0 / (12.0 * h)};
  return s;
}

inline Stencil1D second_derivative_stencil(int c, int n, double h) {
  Stencil1D s;
  double ih2 = 1.0 / (h * h);
  if (c == 0) {
    s.count = 4;
    s.off = {0, 1, 2, 3};
    s.w = {2 * ih2, -5 * ih2, 4 * ih2, -1 * ih2};
  } else if (c == n - 1) {
    s.count = 4;
    s.off = {0, -1, -2, -3};
    s.w = {2 * ih2, -5 * ih2, 4 * ih2, -1 * ih2};
  } else {
    s.count = 3;
    s.off = {-1, 0, 1, 0};
    s.w = {ih2, -2 * ih2, ih2, 0};
  }
  return s;
}

namespace detail {
template <class StencilFn>
inline std::vector<cplx> apply_axis(const Grid& g, const std::vector<cplx>& f, int d, StencilFn&& fn) {
  std::vector<cplx> out(g.size());
  const std::size_t st = g.stride(d);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    int c = g.ijk(idx)[d];
    Stencil1D s = fn(c, g.n(d), g.spacing(d));
    cplx acc = 0.0;
    for (int m = 0; m < s.count; ++m)
      acc += s.w[m] * f[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) + s.off[m] * static_cast<std::ptrdiff_t>(st))];
    out[idx] = acc;
  }
  return out;
}
}  // namespace detail

inline ScalarField partial(const ScalarField& f, int d) {
  return ScalarField(f.grid(), detail::apply_axis(f.grid(), f.data(), d, first_derivative_stencil));
}

inline VectorField gradient(const ScalarField& f) {
  VectorField g(f.grid());
  for (int d = 0; d < 3; ++d) g.comp(d) = detail::apply_axis(f.grid(), f.data(), d, first_derivative_stencil);
  return g;
}

inline VectorField gradient_fourth_order(const ScalarField& f) {
  VectorField g(f.grid());
  for (int d = 0; d < 3; ++d) g.comp(d) = detail::apply_axis(f.grid(), f.data(), d, fourth_order_first_derivative_stencil);
  return g;
}

inline ScalarField divergence(const VectorField& v) {
  ScalarField out(v.grid());
  for (int d = 0; d < 3; ++d) {
    auto p = detail::apply_axis(v.grid(), v.comp(d), d, first_derivative_stencil);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
  }
  return out;
}

// (dA)_{jk} = d_j A_k - d_k A_j.
inline TwoFormField curl(const VectorField& v) {
  TwoFormField out(v.grid());
  const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (int s = 0; s < 3; ++s) {
    int j = pairs[s][0], k = pairs[s][1];
    auto djak = detail::apply_axis(v.grid(), v.comp(k), j, first_derivative_stencil);
    auto dkaj = detail::apply_axis(v.grid(), v.comp(j), k, first_derivative_stencil);
    for (std::size_t i = 0; i < djak.size(); ++i) out.comp(s)[i] = djak[i] - dkaj[i];
  }
  return out;
}

inline ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.grid());
  for (int d = 0; d < 3; ++d) {
    auto p = detail::apply_axis(f.grid(), f.data(), d, second_derivative_stencil);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
  }
  return out;
}

// Composite trapezoid rule over the box.
inline cplx integrate(const ScalarField& f) {
  const Grid& g = f.grid();
  cplx s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.trapezoid_weight(i) * f[i];
  return s;
}

inline double l2_norm(const ScalarField& f) {
  const Grid& g = f.grid();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.trapezoid_weight(i) * std::norm(f[i]);
  return std::sqrt(s);
}

inline double l2_norm(const VectorField& v) {
  const Grid& g = v.grid();
  double s = 0.0;
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < g.size(); ++i) s += g.trapezoid_weight(i) * std::norm(v.comp(d)[i]);
  return std::sqrt(s);
}

inline double l2_norm(const TwoFormField& w) {
  const Grid& g = w.grid();
  double s = 0.0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < g.size(); ++i) s += g.trapezoid_weight(i) * std::norm(w.comp(c)[i]);
  return std::sqrt(s);
}

// L2 norm restricted to nodes at least `depth` nodes away from every face.
inline double l2_norm_interior(const ScalarField& f, int depth = 1) {
  const Grid& g = f.grid();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.depth(i) >= depth) s += g.cell_volume() * std::norm(f[i]);
  return std::sqrt(s);
}

inline double l2_norm_interior(const VectorField& v, int depth = 1) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    double n = l2_norm_interior(v.component(d), depth);
    s += n * n;
  }
  return std::sqrt(s);
}

inline double l2_norm_interior(const TwoFormField& w, int depth = 1) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    double n = l2_norm_interior(ScalarField(w.grid(), w.comp(c)), depth);
    s += n * n;
  }
  return std::sqrt(s);
}

inline double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (auto z : f.data()) m = std::max(m, std::abs(z));
  return m;
}

inline double max_abs(const VectorField& v) {
  double m = 0.0;
  for (int d = 0; d < 3; ++d)
    for (auto z : v.comp(d)) m = std::max(m, std::abs(z));
  return m;
}

// L2 norm of the full Jacobian of a vector field.
inline double jacobian_norm(const VectorField& v, int depth = 0) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    auto g = gradient(v.component(d));
    double n = depth > 0 ? l2_norm_interior(g, depth) : l2_norm(g);
    s += n * n;
  }
  return std::sqrt(s);
}

// Semiclassical H1 norm: (||f||^2 + ||h grad f||^2)^(1/2).
inline double h1_scl_norm(const ScalarField& f, double h) {
  double a = l2_norm(f);
  double b = h * l2_norm(gradient(f));
  return std::sqrt(a * a + b * b);
}

inline double h1_norm(const ScalarField& f) { return h1_scl_norm(f, 1.0); }

// Cross product of complex 3-vectors without conjugation.
inline CVec3 cross(const CVec3& a, const CVec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline cplx dot3(const CVec3& a, const CVec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }
inline CVec3 to_complex(const Vec3& a) { return {a[0], a[1], a[2]}; }

inline ScalarField dot(const CVec3& a, const VectorField& v) {
  ScalarField s(v.grid());
  for (std::size_t i = 0; i < v.size(); ++i)
    s[i] = a[0] * v.comp(0)[i] + a[1] * v.comp(1)[i] + a[2] * v.comp(2)[i];
  return s;
}

}  // namespace cgolab
