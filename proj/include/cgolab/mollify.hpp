#pragma once

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "log.hpp"
#include "ops.hpp"

namespace cgolab {

// Radial kernel equal to 1 on |x| <= plateau and falling smoothly to 0 at |x| = 1,
// scaled to unit mass. With the default plateau the peak value stays below 1.
struct MollifierSpec {
  double tau = 0.1;
  double plateau = 0.5;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("mollifier: tau must be positive");
    if (!(plateau > 0.0 && plateau < 1.0)) throw ValidationError("mollifier: plateau must lie in (0, 1)");
  }
};

namespace detail {
inline double step_g(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
}  // namespace detail

// Smooth transition from 1 (s <= 0) to 0 (s >= 1).
inline double smooth_step_down(double s) {
  double a = detail::step_g(1.0 - s), b = detail::step_g(s);
  return a + b > 0.0 ? a / (a + b) : (s < 0.5 ? 1.0 : 0.0);
}

inline double mollifier_profile(double r, double plateau) {
  if (r <= plateau) return 1.0;
  if (r >= 1.0) return 0.0;
  return smooth_step_down((r - plateau) / (1.0 - plateau));
}

// Mass of the unnormalized profile over the unit ball.
inline double mollifier_profile_mass(double plateau) {
  const int n = 4000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = (i + 0.5) / n;
    s += r * r * mollifier_profile(r, plateau);
  }
  return 4.0 * std::numbers::pi * s / n;
}

// psi(x) for the unit-scale kernel.
inline double mollifier_kernel(const Vec3& x, double plateau = 0.5) {
  double r = std::sqrt(dot3(x, x));
  return mollifier_profile(r, plateau) / mollifier_profile_mass(plateau);
}

struct KernelSample {
  std::array<int, 3> off;
  double w;
};

// Kernel samples on the grid lattice, normalized so the discrete mass is exactly 1.
inline std::vector<KernelSample> discrete_kernel(const Grid& g, const MollifierSpec& spec) {
  std::vector<KernelSample> ks;
  std::array<int, 3> m{};
  for (int d = 0; d < 3; ++d) m[d] = static_cast<int>(std::floor(spec.tau / g.spacing(d)));
  double total = 0.0;
  for (int c = -m[2]; c <= m[2]; ++c)
    for (int b = -m[1]; b <= m[1]; ++b)
      for (int a = -m[0]; a <= m[0]; ++a) {
        double x = a * g.spacing(0), y = b * g.spacing(1), z = c * g.spacing(2);
        double r = std::sqrt(x * x + y * y + z * z) / spec.tau;
        double w = mollifier_profile(r, spec.plateau);
        if (w > 0.0) {
          ks.push_back({{a, b, c}, w});
          total += w;
        }
      }
  for (auto& k : ks) k.w /= total;
  return ks;
}

namespace detail {

inline int fft_size(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

inline std::mutex& fftw_plan_mutex() {
  static std::mutex mu;
  return mu;
}

inline ScalarField convolve_direct(const ScalarField& f, const std::vector<KernelSample>& ks) {
  const Grid& g = f.grid();
  ScalarField out(g);
  const int n0 = g.n(0), n1 = g.n(1), n2 = g.n(2);
  for (int k = 0; k < n2; ++k)
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n0; ++i) {
        cplx acc = 0.0;
        for (const auto& s : ks) {
          int ii = i - s.off[0], jj = j - s.off[1], kk = k - s.off[2];
          if (ii < 0 || jj < 0 || kk < 0 || ii >= n0 || jj >= n1 || kk >= n2) continue;
          acc += s.w * f.at(ii, jj, kk);
        }
        out.at(i, j, k) = acc;
      }
  return out;
}

// Zero-padded FFT convolution of several fields with one kernel.
class FftConvolver {
 public:
  FftConvolver(const Grid& g, const std::vector<KernelSample>& ks) : g_(g) {
    std::array<int, 3> m{0, 0, 0};
    for (const auto& s : ks)
      for (int d = 0; d < 3; ++d) m[d] = std::max(m[d], std::abs(s.off[d]));
    for (int d = 0; d < 3; ++d) p_[d] = fft_size(g.n(d) + m[d] + 1);
    total_ = static_cast<std::size_t>(p_[0]) * p_[1] * p_[2];
    buf_ = fftw_alloc_complex(total_);
    ker_ = fftw_alloc_complex(total_);
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex());
      // Row-major FFTW dims: slowest axis first.
      fwd_ = fftw_plan_dft_3d(p_[2], p_[1], p_[0], buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_3d(p_[2], p_[1], p_[0], buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    std::fill(reinterpret_cast<double*>(buf_), reinterpret_cast<double*>(buf_) + 2 * total_, 0.0);
    for (const auto& s : ks) {
      std::size_t a = (s.off[0] + p_[0]) % p_[0], b = (s.off[1] + p_[1]) % p_[1], c = (s.off[2] + p_[2]) % p_[2];
      buf_[a + p_[0] * (b + p_[1] * c)][0] += s.w;
    }
    fftw_execute(fwd_);
    std::copy(reinterpret_cast<double*>(buf_), reinterpret_cast<double*>(buf_) + 2 * total_, reinterpret_cast<double*>(ker_));
  }
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;
  ~FftConvolver() {
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(bwd_);
    }
    fftw_free(buf_);
    fftw_free(ker_);
  }

  ScalarField apply(const ScalarField& f) {
    std::fill(reinterpret_cast<double*>(buf_), reinterpret_cast<double*>(buf_) + 2 * total_, 0.0);
    for (int k = 0; k < g_.n(2); ++k)
      for (int j = 0; j < g_.n(1); ++j)
        for (int i = 0; i < g_.n(0); ++i) {
          cplx z = f.at(i, j, k);
          auto& b = buf_[i + p_[0] * (static_cast<std::size_t>(j) + p_[1] * static_cast<std::size_t>(k))];
          b[0] = z.real();
          b[1] = z.imag();
        }
    fftw_execute(fwd_);
    for (std::size_t t = 0; t < total_; ++t) {
      cplx z = cplx(buf_[t][0], buf_[t][1]) * cplx(ker_[t][0], ker_[t][1]);
      buf_[t][0] = z.real();
      buf_[t][1] = z.imag();
    }
    fftw_execute(bwd_);
    const double scale = 1.0 / static_cast<double>(total_);
    ScalarField out(g_);
    for (int k = 0; k < g_.n(2); ++k)
      for (int j = 0; j < g_.n(1); ++j)
        for (int i = 0; i < g_.n(0); ++i) {
          const auto& b = buf_[i + p_[0] * (static_cast<std::size_t>(j) + p_[1] * static_cast<std::size_t>(k))];
          out.at(i, j, k) = cplx(b[0], b[1]) * scale;
        }
    return out;
  }

 private:
  Grid g_;
  std::array<int, 3> p_{};
  std::size_t total_ = 0;
  fftw_complex* buf_ = nullptr;
  fftw_complex* ker_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

inline bool prefer_direct(const Grid& g, std::size_t kernel_size) {
  double n = static_cast<double>(g.size());
  return static_cast<double>(kernel_size) * n < 8.0 * 30.0 * n * std::log2(std::max(n, 2.0));
}

}  // namespace detail

// Convolution with the kernel, treating samples outside the grid as zero.
inline ScalarField mollify(const ScalarField& f, const MollifierSpec& spec) {
  spec.validate();
  const Grid& g = f.grid();
  if (spec.tau < g.max_spacing()) {
    warn("mollifier width " + std::to_string(spec.tau) + " is below the grid spacing; returning the input unchanged");
    return f;
  }
  auto ks = discrete_kernel(g, spec);
  if (detail::prefer_direct(g, ks.size())) return detail::convolve_direct(f, ks);
  detail::FftConvolver conv(g, ks);
  return conv.apply(f);
}

inline VectorField mollify(const VectorField& v, const MollifierSpec& spec) {
  spec.validate();
  const Grid& g = v.grid();
  if (spec.tau < g.max_spacing()) {
    warn("mollifier width " + std::to_string(spec.tau) + " is below the grid spacing; returning the input unchanged");
    return v;
  }
  auto ks = discrete_kernel(g, spec);
  VectorField out(g);
  if (detail::prefer_direct(g, ks.size())) {
    for (int d = 0; d < 3; ++d) out.set_component(d, detail::convolve_direct(v.component(d), ks));
    return out;
  }
  detail::FftConvolver conv(g, ks);
  for (int d = 0; d < 3; ++d) out.set_component(d, conv.apply(v.component(d)));
  return out;
}

// Grid with the same spacing covering the cube around the enclosing ball, aligned so that
// every node of the original grid is a node of the extension.
struct ExtendedGrid {
  Grid grid;
  std::array<int, 3> offset{};  // original node (i,j,k) sits at (i,j,k) + offset

  explicit ExtendedGrid(const Grid& base) {
    const DomainSpec& s = base.spec();
    const Vec3 c = s.center();
    const double R = s.ball_radius > 0.0 ? s.ball_radius : 1.25 * s.half_diagonal();
    DomainSpec e = s;
    for (int d = 0; d < 3; ++d) {
      int m = static_cast<int>(std::ceil((c[d] + R - s.upper[d]) / base.spacing(d) - 1e-9));
      m = std::max(m, 0);
      offset[d] = m;
      e.lower[d] = s.lower[d] - m * base.spacing(d);
      e.upper[d] = s.upper[d] + m * base.spacing(d);
      e.n[d] = s.n[d] + 2 * m;
    }
    e.ball_radius = R;
    grid = Grid(e);
  }

  std::size_t to_extended(const Grid& base, std::size_t idx) const {
    auto c = base.ijk(idx);
    return grid.index(c[0] + offset[0], c[1] + offset[1], c[2] + offset[2]);
  }
};

// Trilinear interpolation with zero value outside the grid.
inline cplx interpolate(const ScalarField& f, const Vec3& x) {
  const Grid& g = f.grid();
  int i0[3];
  double t[3];
  for (int d = 0; d < 3; ++d) {
    double u = (x[d] - g.spec().lower[d]) / g.spacing(d);
    if (u < 0.0 || u > g.n(d) - 1) return 0.0;
    int i = static_cast<int>(std::floor(u));
    if (i >= g.n(d) - 1) i = g.n(d) - 2;
    i0[d] = i;
    t[d] = u - i;
  }
  cplx acc = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        double w = (a ? t[0] : 1 - t[0]) * (b ? t[1] : 1 - t[1]) * (c ? t[2] : 1 - t[2]);
        if (w != 0.0) acc += w * f.at(i0[0] + a, i0[1] + b, i0[2] + c);
      }
  return acc;
}

// Catmull-Rom tricubic interpolation, zero outside the grid; neighbours past the edge are dropped.
inline cplx interpolate_cubic(const ScalarField& f, const Vec3& x) {
  const Grid& g = f.grid();
  int i0[3];
  double w[3][4];
  for (int d = 0; d < 3; ++d) {
    double u = (x[d] - g.spec().lower[d]) / g.spacing(d);
    if (u < 0.0 || u > g.n(d) - 1) return 0.0;
    int i = static_cast<int>(std::floor(u));
    if (i >= g.n(d) - 1) i = g.n(d) - 2;
    i0[d] = i - 1;
    double t = u - i;
    w[d][0] = ((-t + 2.0) * t - 1.0) * t / 2.0;
    w[d][1] = ((3.0 * t - 5.0) * t * t + 2.0) / 2.0;
    w[d][2] = ((-3.0 * t + 4.0) * t + 1.0) * t / 2.0;
    w[d][3] = (t - 1.0) * t * t / 2.0;
  }
  cplx acc = 0.0;
  for (int c = 0; c < 4; ++c) {
    int kk = i0[2] + c;
    if (kk < 0 || kk >= g.n(2)) continue;
    for (int b = 0; b < 4; ++b) {
      int jj = i0[1] + b;
      if (jj < 0 || jj >= g.n(1)) continue;
      double wbc = w[1][b] * w[2][c];
      for (int a = 0; a < 4; ++a) {
        int ii = i0[0] + a;
        if (ii < 0 || ii >= g.n(0)) continue;
        acc += (w[0][a] * wbc) * f.at(ii, jj, kk);
      }
    }
  }
  return acc;
}

// Extension past the box: value at the nearest box point times a smooth radial cutoff that is
// 1 inside the circumscribed sphere of the box and 0 beyond the enclosing ball.
inline ScalarField extend_to_ball(const ScalarField& f, const ExtendedGrid& ext) {
  const Grid& g = f.grid();
  const DomainSpec& s = g.spec();
  const Vec3 c = s.center();
  const double r_in = s.half_diagonal(), R = ext.grid.spec().ball_radius;
  ScalarField out(ext.grid);
  for (std::size_t idx = 0; idx < ext.grid.size(); ++idx) {
    auto e = ext.grid.ijk(idx);
    int i = e[0] - ext.offset[0], j = e[1] - ext.offset[1], k = e[2] - ext.offset[2];
    if (i >= 0 && j >= 0 && k >= 0 && i < g.n(0) && j < g.n(1) && k < g.n(2)) {
      out[idx] = f.at(i, j, k);
      continue;
    }
    Vec3 x = ext.grid.point(idx);
    double r = std::sqrt((x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]) + (x[2] - c[2]) * (x[2] - c[2]));
    double cut = r >= R ? 0.0 : smooth_step_down((r - r_in) / (R - r_in));
    if (cut == 0.0) continue;
    Vec3 y{};
    for (int d = 0; d < 3; ++d) y[d] = std::clamp(x[d], s.lower[d], s.upper[d]);
    out[idx] = cut * interpolate(f, y);
  }
  return out;
}

inline VectorField extend_to_ball(const VectorField& v, const ExtendedGrid& ext) {
  VectorField out(ext.grid);
  for (int d = 0; d < 3; ++d) out.set_component(d, extend_to_ball(v.component(d), ext));
  return out;
}

// Samples of an extended field at the nodes of the original grid.
inline ScalarField restrict_to(const ScalarField& f, const ExtendedGrid& ext, const Grid& base) {
  ScalarField out(base);
  for (std::size_t idx = 0; idx < base.size(); ++idx) out[idx] = f[ext.to_extended(base, idx)];
  return out;
}

inline VectorField restrict_to(const VectorField& v, const ExtendedGrid& ext, const Grid& base) {
  VectorField out(base);
  for (int d = 0; d < 3; ++d) out.set_component(d, restrict_to(v.component(d), ext, base));
  return out;
}

}  // namespace cgolab
