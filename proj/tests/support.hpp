#pragma once

#include <cmath>
#include <vector>

#include "cgolab/cgo.hpp"
#include "cgolab/phantom.hpp"

namespace cgolab::testing {

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline CVec3 null_direction(const Frame& fr) {
  return {cplx(fr.mu1[0], fr.mu2[0]), cplx(fr.mu1[1], fr.mu2[1]), cplx(fr.mu1[2], fr.mu2[2])};
}

// Relative residual of (zeta0 . grad) N^{-1} f - f on an m x m patch of the plane through
// `center` spanned by Re zeta0, Im zeta0. Derivatives use fourth-order differences on the patch.
template <class F>
double plane_forward_residual(const F& f, const SupportBox& box, const CVec3& zeta0, const Vec3& center,
                              double half_width, int m, int n_theta, double step) {
  const Vec3 e1{zeta0[0].real(), zeta0[1].real(), zeta0[2].real()};
  const Vec3 e2{zeta0[0].imag(), zeta0[1].imag(), zeta0[2].imag()};
  const double ds = 2.0 * half_width / (m - 1);
  std::vector<Vec3> pts(static_cast<std::size_t>(m) * m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      double s = -half_width + i * ds, t = -half_width + j * ds;
      for (int d = 0; d < 3; ++d) pts[i + m * j][d] = center[d] + s * e1[d] + t * e2[d];
    }
  auto phi = cauchy_transform_at(f, box, zeta0, pts, n_theta, step);
  auto at = [&](int i, int j) { return phi[i + m * j]; };
  double num = 0.0, den = 0.0;
  for (int j = 2; j < m - 2; ++j)
    for (int i = 2; i < m - 2; ++i) {
      cplx ds1 = (8.0 * (at(i + 1, j) - at(i - 1, j)) - (at(i + 2, j) - at(i - 2, j))) / (12.0 * ds);
      cplx ds2 = (8.0 * (at(i, j + 1) - at(i, j - 1)) - (at(i, j + 2) - at(i, j - 2))) / (12.0 * ds);
      cplx fv = f(pts[i + m * j]);
      num += std::norm(ds1 + cplx(0, 1) * ds2 - fv);
      den += std::norm(fv);
    }
  return std::sqrt(num / den);
}

// Complex bump used as a transform input.
struct BumpInput {
  Vec3 center;
  double radius;
  cplx amp;

  cplx operator()(const Vec3& x) const { return amp * phantom::ball_bump(x, center, radius); }
  SupportBox box() const {
    return {{center[0] - radius, center[1] - radius, center[2] - radius},
            {center[0] + radius, center[1] + radius, center[2] + radius}};
  }
};

inline std::vector<BumpInput> transform_bumps() {
  return {{{0.5, 0.5, 0.45}, 0.25, {1.0, 0.0}},
          {{0.55, 0.45, 0.5}, 0.3, {0.4, -0.8}},
          {{0.45, 0.55, 0.55}, 0.35, {1.0, 0.5}}};
}

}  // namespace cgolab::testing
