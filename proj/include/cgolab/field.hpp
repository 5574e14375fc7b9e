#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "grid.hpp"

namespace cgolab {

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& g, cplx value = 0.0) : grid_(g), v_(g.size(), value) {}
  ScalarField(const Grid& g, std::vector<cplx> values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) throw ValidationError("scalar field: sample count does not match grid");
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  cplx& operator[](std::size_t i) { return v_[i]; }
  const cplx& operator[](std::size_t i) const { return v_[i]; }
  cplx& at(int i, int j, int k) { return v_[grid_.index(i, j, k)]; }
  const cplx& at(int i, int j, int k) const { return v_[grid_.index(i, j, k)]; }
  std::vector<cplx>& data() { return v_; }
  const std::vector<cplx>& data() const { return v_; }

  template <class F>
  static ScalarField sample(const Grid& g, F&& f) {
    ScalarField s(g);
    for (std::size_t i = 0; i < g.size(); ++i) s.v_[i] = f(g.point(i));
    return s;
  }

  ScalarField& operator+=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  ScalarField& operator*=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] *= o.v_[i];
    return *this;
  }
  ScalarField& operator*=(cplx s) {
    for (auto& x : v_) x *= s;
    return *this;
  }
  ScalarField& operator+=(cplx s) {
    for (auto& x : v_) x += s;
    return *this;
  }

  template <class F>
  ScalarField map(F&& f) const {
    ScalarField out(grid_);
    for (std::size_t i = 0; i < v_.size(); ++i) out.v_[i] = f(v_[i]);
    return out;
  }

  void check(const ScalarField& o) const {
    if (!(grid_.spec() == o.grid_.spec())) throw ValidationError("field: grids do not match");
  }

 private:
  Grid grid_;
  std::vector<cplx> v_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
inline ScalarField operator*(cplx s, ScalarField a) { return a *= s; }
inline ScalarField operator*(ScalarField a, cplx s) { return a *= s; }

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Grid& g) : grid_(g) {
    for (auto& c : c_) c.assign(g.size(), 0.0);
  }
  VectorField(const ScalarField& x, const ScalarField& y, const ScalarField& z) : grid_(x.grid()) {
    x.check(y);
    x.check(z);
    c_ = {x.data(), y.data(), z.data()};
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  std::vector<cplx>& comp(int d) { return c_[d]; }
  const std::vector<cplx>& comp(int d) const { return c_[d]; }
  ScalarField component(int d) const { return ScalarField(grid_, c_[d]); }
  void set_component(int d, const ScalarField& s) {
    if (!(s.grid().spec() == grid_.spec())) throw ValidationError("vector field: grids do not match");
    c_[d] = s.data();
  }
  CVec3 operator()(std::size_t i) const { return {c_[0][i], c_[1][i], c_[2][i]}; }
  void set(std::size_t i, const CVec3& v) {
    for (int d = 0; d < 3; ++d) c_[d][i] = v[d];
  }

  template <class F>
  static VectorField sample(const Grid& g, F&& f) {
    VectorField s(g);
    for (std::size_t i = 0; i < g.size(); ++i) s.set(i, f(g.point(i)));
    return s;
  }

  VectorField& operator+=(const VectorField& o) {
    check(o);
    for (int d = 0; d < 3; ++d)
      for (std::size_t i = 0; i < size(); ++i) c_[d][i] += o.c_[d][i];
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    check(o);
    for (int d = 0; d < 3; ++d)
      for (std::size_t i = 0; i < size(); ++i) c_[d][i] -= o.c_[d][i];
    return *this;
  }
  VectorField& operator*=(cplx s) {
    for (auto& c : c_)
      for (auto& x : c) x *= s;
    return *this;
  }
  VectorField& operator*=(const ScalarField& s) {
    if (!(s.grid().spec() == grid_.spec())) throw ValidationError("vector field: grids do not match");
    for (auto& c : c_)
      for (std::size_t i = 0; i < size(); ++i) c[i] *= s[i];
    return *this;
  }

  void check(const VectorField& o) const {
    if (!(grid_.spec() == o.grid_.spec())) throw ValidationError("field: grids do not match");
  }

 private:
  Grid grid_;
  std::array<std::vector<cplx>, 3> c_;
};

inline VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
inline VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
inline VectorField operator*(cplx s, VectorField a) { return a *= s; }
inline VectorField operator*(const ScalarField& s, VectorField a) { return a *= s; }

// Components (0,1), (0,2), (1,2) of an antisymmetric two-form.
class TwoFormField {
 public:
  TwoFormField() = default;
  explicit TwoFormField(const Grid& g) : grid_(g) {
    for (auto& c : c_) c.assign(g.size(), 0.0);
  }
  const Grid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  static int slot(int j, int k) { return j == 0 ? k - 1 : 2; }
  std::vector<cplx>& comp(int s) { return c_[s]; }
  const std::vector<cplx>& comp(int s) const { return c_[s]; }

 private:
  Grid grid_;
  std::array<std::vector<cplx>, 3> c_;
};

// Values on the boundary nodes of a grid, in Grid::boundary_nodes() order.
struct BoundaryFunction {
  Grid grid;
  std::vector<std::size_t> nodes;
  std::vector<cplx> values;

  static BoundaryFunction trace(const ScalarField& f) {
    BoundaryFunction b{f.grid(), f.grid().boundary_nodes(), {}};
    b.values.reserve(b.nodes.size());
    for (auto idx : b.nodes) b.values.push_back(f[idx]);
    return b;
  }
  template <class F>
  static BoundaryFunction sample(const Grid& g, F&& f) {
    BoundaryFunction b{g, g.boundary_nodes(), {}};
    for (auto idx : b.nodes) b.values.push_back(f(g.point(idx)));
    return b;
  }
};

// Pointwise helpers.
inline ScalarField dot(const VectorField& a, const VectorField& b) {
  a.check(b);
  ScalarField s(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i)
    s[i] = a.comp(0)[i] * b.comp(0)[i] + a.comp(1)[i] * b.comp(1)[i] + a.comp(2)[i] * b.comp(2)[i];
  return s;
}

inline ScalarField conj(const ScalarField& f) {
  return f.map([](cplx z) { return std::conj(z); });
}
inline ScalarField exp(const ScalarField& f) {
  return f.map([](cplx z) { return std::exp(z); });
}
inline ScalarField real_part(const ScalarField& f) {
  return f.map([](cplx z) { return cplx(z.real(), 0.0); });
}
inline ScalarField imag_part(const ScalarField& f) {
  return f.map([](cplx z) { return cplx(z.imag(), 0.0); });
}
inline VectorField map_components(const VectorField& v, const std::function<cplx(cplx)>& f) {
  VectorField out(v.grid());
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < v.size(); ++i) out.comp(d)[i] = f(v.comp(d)[i]);
  return out;
}
inline VectorField real_part(const VectorField& v) {
  return map_components(v, [](cplx z) { return cplx(z.real(), 0.0); });
}
inline VectorField imag_part(const VectorField& v) {
  return map_components(v, [](cplx z) { return cplx(z.imag(), 0.0); });
}

inline bool all_finite(const ScalarField& f) {
  return std::all_of(f.data().begin(), f.data().end(),
                     [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}
inline bool all_finite(const VectorField& v) {
  for (int d = 0; d < 3; ++d)
    for (auto z : v.comp(d))
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

}  // namespace cgolab
