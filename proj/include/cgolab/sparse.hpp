#pragma once

#include <Eigen/Sparse>
#include <umfpack.h>

#include <memory>

#include "field.hpp"

namespace cgolab {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<cplx, int>;

// Complex sparse LU backed by UMFPACK.
class SparseLu {
 public:
  SparseLu() = default;
  explicit SparseLu(const SpMat& a) { factor(a); }
  SparseLu(const SparseLu&) = delete;
  SparseLu& operator=(const SparseLu&) = delete;
  SparseLu(SparseLu&& o) noexcept { swap(o); }
  SparseLu& operator=(SparseLu&& o) noexcept {
    swap(o);
    return *this;
  }
  ~SparseLu() { release(); }

  // Returns false when UMFPACK reports a singular or failed factorization.
  bool factor(const SpMat& a) {
    release();
    if (a.rows() != a.cols()) throw ValidationError("sparse LU: matrix must be square");
    a_ = a;
    a_.makeCompressed();
    n_ = static_cast<int>(a_.rows());
    umfpack_zi_defaults(control_);
    control_[UMFPACK_PRL] = 0;
    const double* ax = reinterpret_cast<const double*>(a_.valuePtr());
    int st = umfpack_zi_symbolic(n_, n_, a_.outerIndexPtr(), a_.innerIndexPtr(), ax, nullptr, &symbolic_, control_, info_);
    if (st != UMFPACK_OK) {
      status_ = st;
      return false;
    }
    st = umfpack_zi_numeric(a_.outerIndexPtr(), a_.innerIndexPtr(), ax, nullptr, symbolic_, &numeric_, control_, info_);
    status_ = st;
    rcond_ = info_[UMFPACK_RCOND];
    return st == UMFPACK_OK;
  }

  bool ok() const { return numeric_ != nullptr && status_ == UMFPACK_OK; }
  int status() const { return status_; }
  // Reciprocal condition estimate from the pivots; crude but cheap.
  double rcond() const { return rcond_; }
  int size() const { return n_; }

  // Solves A x = b, or A^H x = b when `adjoint` is set.
  std::vector<cplx> solve(const std::vector<cplx>& b, bool adjoint = false) const {
    if (!numeric_) throw NumericalError("sparse LU: solve before a successful factorization");
    if (static_cast<int>(b.size()) != n_) throw ValidationError("sparse LU: right-hand side has wrong length");
    std::vector<cplx> x(b.size());
    double info[UMFPACK_INFO];
    int st = umfpack_zi_solve(adjoint ? UMFPACK_At : UMFPACK_A, a_.outerIndexPtr(), a_.innerIndexPtr(),
                              reinterpret_cast<const double*>(a_.valuePtr()), nullptr,
                              reinterpret_cast<double*>(x.data()), nullptr, reinterpret_cast<const double*>(b.data()),
                              nullptr, numeric_, control_, info);
    if (st != UMFPACK_OK && st != UMFPACK_WARNING_singular_matrix)
      throw NumericalError("sparse LU: solve failed with status " + std::to_string(st));
    return x;
  }

  const SpMat& matrix() const { return a_; }

 private:
  void release() {
    if (numeric_) umfpack_zi_free_numeric(&numeric_);
    if (symbolic_) umfpack_zi_free_symbolic(&symbolic_);
    numeric_ = symbolic_ = nullptr;
  }
  void swap(SparseLu& o) noexcept {
    std::swap(a_, o.a_);
    std::swap(n_, o.n_);
    std::swap(symbolic_, o.symbolic_);
    std::swap(numeric_, o.numeric_);
    std::swap(status_, o.status_);
    std::swap(rcond_, o.rcond_);
    std::swap(control_, o.control_);
    std::swap(info_, o.info_);
  }

  SpMat a_;
  int n_ = 0;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  int status_ = UMFPACK_ERROR_invalid_Numeric_object;
  double rcond_ = 0.0;
  double control_[UMFPACK_CONTROL]{};
  double info_[UMFPACK_INFO]{};
};

inline std::vector<cplx> multiply(const SpMat& a, const std::vector<cplx>& x) {
  Eigen::Map<const Eigen::VectorXcd> xm(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXcd y = a * xm;
  return {y.data(), y.data() + y.size()};
}

inline std::vector<cplx> multiply_adjoint(const SpMat& a, const std::vector<cplx>& x) {
  Eigen::Map<const Eigen::VectorXcd> xm(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXcd y = a.adjoint() * xm;
  return {y.data(), y.data() + y.size()};
}

inline double vec_norm(const std::vector<cplx>& v) {
  double s = 0.0;
  for (auto z : v) s += std::norm(z);
  return std::sqrt(s);
}

// Interior / boundary numbering of a grid.
struct NodeSplit {
  std::vector<std::size_t> interior, boundary;
  std::vector<int> pos;  // position within its own list

  explicit NodeSplit(const Grid& g) : pos(g.size(), -1) {
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      if (g.on_boundary(idx)) {
        pos[idx] = static_cast<int>(boundary.size());
        boundary.push_back(idx);
      } else {
        pos[idx] = static_cast<int>(interior.size());
        interior.push_back(idx);
      }
    }
  }
};

enum class DriftScheme { Centered, Upwind };

// Finite-difference operator -kappa Lap u + b . grad u + c u on interior rows, split into the
// interior block and the coupling to boundary values. Upwinding uses the real part of b.
struct InteriorSystem {
  NodeSplit split;
  SpMat A_II, A_IB;

  std::vector<cplx> boundary_rhs(const std::vector<cplx>& boundary_values) const {
    auto r = multiply(A_IB, boundary_values);
    for (auto& z : r) z = -z;
    return r;
  }
};

inline InteriorSystem assemble_interior(const Grid& g, cplx kappa, const VectorField* drift, const ScalarField* reaction,
                                        DriftScheme scheme = DriftScheme::Centered) {
  InteriorSystem sys{NodeSplit(g), {}, {}};
  const auto& split = sys.split;
  std::vector<Triplet> tii, tib;
  tii.reserve(split.interior.size() * 7);
  auto add = [&](int row, std::size_t col, cplx v) {
    if (g.on_boundary(col))
      tib.emplace_back(row, split.pos[col], v);
    else
      tii.emplace_back(row, split.pos[col], v);
  };
  for (std::size_t r = 0; r < split.interior.size(); ++r) {
    std::size_t idx = split.interior[r];
    int row = static_cast<int>(r);
    cplx diag = 0.0;
    for (int d = 0; d < 3; ++d) {
      double h = g.spacing(d);
      std::size_t st = g.stride(d);
      cplx lap = kappa / (h * h);
      cplx lo = -lap, hi = -lap;
      diag += 2.0 * lap;
      if (drift) {
        cplx b = drift->comp(d)[idx];
        if (scheme == DriftScheme::Centered) {
          hi += b / (2 * h);
          lo -= b / (2 * h);
        } else {
          double br = b.real();
          if (br > 0) {
            diag += br / h;
            lo -= br / h;
          } else {
            diag -= br / h;
            hi += br / h;
          }
        }
      }
      add(row, idx - st, lo);
      add(row, idx + st, hi);
    }
    if (reaction) diag += (*reaction)[idx];
    tii.emplace_back(row, row, diag);
  }
  const int ni = static_cast<int>(split.interior.size()), nb = static_cast<int>(split.boundary.size());
  sys.A_II.resize(ni, ni);
  sys.A_II.setFromTriplets(tii.begin(), tii.end());
  sys.A_IB.resize(ni, nb);
  sys.A_IB.setFromTriplets(tib.begin(), tib.end());
  sys.A_II.makeCompressed();
  sys.A_IB.makeCompressed();
  return sys;
}

// Solves the interior system with Dirichlet data and an optional interior source.
inline ScalarField solve_interior(const InteriorSystem& sys, const SparseLu& lu, const Grid& g,
                                  const std::vector<cplx>& boundary_values, const ScalarField* source = nullptr) {
  std::vector<cplx> rhs = boundary_values.empty() ? std::vector<cplx>(sys.split.interior.size(), 0.0)
                                                  : sys.boundary_rhs(boundary_values);
  if (source)
    for (std::size_t r = 0; r < rhs.size(); ++r) rhs[r] += (*source)[sys.split.interior[r]];
  auto x = lu.solve(rhs);
  ScalarField u(g);
  for (std::size_t r = 0; r < x.size(); ++r) u[sys.split.interior[r]] = x[r];
  if (!boundary_values.empty())
    for (std::size_t b = 0; b < sys.split.boundary.size(); ++b) u[sys.split.boundary[b]] = boundary_values[b];
  return u;
}

}  // namespace cgolab
