#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"

namespace cgolab {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using CVec3 = std::array<cplx, 3>;

// Box [lower, upper] sampled with n[d] nodes per axis, plus the radius of the
// enclosing ball used when fields are extended past the box.
struct DomainSpec {
  Vec3 lower{0.0, 0.0, 0.0};
  Vec3 upper{1.0, 1.0, 1.0};
  std::array<int, 3> n{17, 17, 17};
  double ball_radius = 0.0;

  Vec3 center() const {
    return {0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1]), 0.5 * (lower[2] + upper[2])};
  }

  double half_diagonal() const {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) s += (upper[d] - lower[d]) * (upper[d] - lower[d]);
    return 0.5 * std::sqrt(s);
  }

  void validate() const {
    for (int d = 0; d < 3; ++d) {
      if (!(upper[d] > lower[d]) || !std::isfinite(lower[d]) || !std::isfinite(upper[d]))
        throw ValidationError("domain: upper bound must exceed lower bound on axis " + std::to_string(d));
      if (n[d] < 5) throw ValidationError("domain: at least 5 nodes per axis are required");
    }
    if (!(ball_radius > half_diagonal()))
      throw ValidationError("domain: ball radius must exceed the half diagonal of the box");
  }

  bool operator==(const DomainSpec& o) const {
    return lower == o.lower && upper == o.upper && n == o.n;
  }
};

// Box with a default ball radius of 1.25 half diagonals.
inline DomainSpec make_domain(Vec3 lower, Vec3 upper, std::array<int, 3> n) {
  DomainSpec d{lower, upper, n, 0.0};
  d.ball_radius = 1.25 * d.half_diagonal();
  return d;
}

inline DomainSpec unit_cube(int n) { return make_domain({0, 0, 0}, {1, 1, 1}, {n, n, n}); }

// Index arithmetic on a DomainSpec. Linear index is x-fastest.
class Grid {
 public:
  Grid() = default;
  explicit Grid(const DomainSpec& spec) : spec_(spec) {
    for (int d = 0; d < 3; ++d) {
      if (spec.n[d] < 2) throw ValidationError("grid: need at least 2 nodes per axis");
      h_[d] = (spec.upper[d] - spec.lower[d]) / (spec.n[d] - 1);
    }
  }

  const DomainSpec& spec() const { return spec_; }
  int n(int d) const { return spec_.n[d]; }
  const Vec3& spacing() const { return h_; }
  double spacing(int d) const { return h_[d]; }
  double cell_volume() const { return h_[0] * h_[1] * h_[2]; }
  double max_spacing() const { return std::max(h_[0], std::max(h_[1], h_[2])); }
  std::size_t size() const {
    return static_cast<std::size_t>(spec_.n[0]) * spec_.n[1] * spec_.n[2];
  }
  std::size_t stride(int d) const {
    return d == 0 ? 1 : (d == 1 ? static_cast<std::size_t>(spec_.n[0])
                                : static_cast<std::size_t>(spec_.n[0]) * spec_.n[1]);
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + spec_.n[0] * (static_cast<std::size_t>(j) + spec_.n[1] * static_cast<std::size_t>(k));
  }
  std::array<int, 3> ijk(std::size_t idx) const {
    int i = static_cast<int>(idx % spec_.n[0]);
    idx /= spec_.n[0];
    int j = static_cast<int>(idx % spec_.n[1]);
    int k = static_cast<int>(idx / spec_.n[1]);
    return {i, j, k};
  }
  double coord(int d, int i) const { return spec_.lower[d] + i * h_[d]; }
  Vec3 point(int i, int j, int k) const { return {coord(0, i), coord(1, j), coord(2, k)}; }
  Vec3 point(std::size_t idx) const {
    auto c = ijk(idx);
    return point(c[0], c[1], c[2]);
  }

  bool on_boundary(int i, int j, int k) const {
    return i == 0 || j == 0 || k == 0 || i == spec_.n[0] - 1 || j == spec_.n[1] - 1 || k == spec_.n[2] - 1;
  }
  bool on_boundary(std::size_t idx) const {
    auto c = ijk(idx);
    return on_boundary(c[0], c[1], c[2]);
  }
  // Distance in nodes to the nearest face.
  int depth(std::size_t idx) const {
    auto c = ijk(idx);
    int m = c[0];
    for (int d = 0; d < 3; ++d) m = std::min(m, std::min(c[d], spec_.n[d] - 1 - c[d]));
    return m;
  }

  // Boundary nodes in increasing linear order.
  std::vector<std::size_t> boundary_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t idx = 0; idx < size(); ++idx)
      if (on_boundary(idx)) out.push_back(idx);
    return out;
  }
  std::vector<std::size_t> interior_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t idx = 0; idx < size(); ++idx)
      if (!on_boundary(idx)) out.push_back(idx);
    return out;
  }

  // Composite trapezoid weight of a node.
  double trapezoid_weight(std::size_t idx) const {
    auto c = ijk(idx);
    double w = cell_volume();
    for (int d = 0; d < 3; ++d)
      if (c[d] == 0 || c[d] == spec_.n[d] - 1) w *= 0.5;
    return w;
  }

 private:
  DomainSpec spec_{};
  Vec3 h_{0, 0, 0};
};

}  // namespace cgolab
