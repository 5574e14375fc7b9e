#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <memory>

#include "sparse.hpp"

namespace cgolab {

// Schur complement K_BB - K_BI K_II^{-1} K_IB of a full-grid stencil matrix onto the boundary
// nodes, computed by multifrontal elimination over a geometric nested-dissection tree of the
// interior. Boundary nodes are never eliminated; they form the root front.
class BoundarySchur {
 public:
  BoundarySchur(const Grid& g, const SpMat& K, int leaf_size = 64) : g_(g), K_(K), Krow_(K), leaf_(leaf_size) {
    if (K.rows() != static_cast<Eigen::Index>(g.size()) || K.cols() != K.rows())
      throw ValidationError("boundary Schur: matrix does not match the grid");
    K_.makeCompressed();
    Krow_.makeCompressed();
  }

  Eigen::MatrixXcd compute() {
    eliminated_.assign(g_.size(), 0);
    where_.assign(g_.size(), -1);
    Box all{{1, 1, 1}, {g_.n(0) - 2, g_.n(1) - 2, g_.n(2) - 2}};
    Update top = process(all);

    auto bnodes = g_.boundary_nodes();
    const Eigen::Index nb = static_cast<Eigen::Index>(bnodes.size());
    for (Eigen::Index i = 0; i < nb; ++i) where_[bnodes[i]] = static_cast<int>(i);
    Eigen::MatrixXcd lam = Eigen::MatrixXcd::Zero(nb, nb);
    for (Eigen::Index c = 0; c < nb; ++c) {
      int col = static_cast<int>(bnodes[c]);
      for (SpMat::InnerIterator it(K_, col); it; ++it) {
        int p = where_[it.row()];
        if (p >= 0 && g_.on_boundary(static_cast<std::size_t>(it.row()))) lam(p, c) += it.value();
      }
    }
    extend_add(lam, top);
    for (auto b : bnodes) where_[b] = -1;
    return lam;
  }

 private:
  struct Box {
    std::array<int, 3> lo, hi;
    long volume() const {
      long v = 1;
      for (int d = 0; d < 3; ++d) v *= std::max(0, hi[d] - lo[d] + 1);
      return v;
    }
  };
  struct Update {
    std::vector<int> idx;
    Eigen::MatrixXcd S;
  };

  std::vector<int> nodes_in(const Box& b) const {
    std::vector<int> out;
    for (int k = b.lo[2]; k <= b.hi[2]; ++k)
      for (int j = b.lo[1]; j <= b.hi[1]; ++j)
        for (int i = b.lo[0]; i <= b.hi[0]; ++i) out.push_back(static_cast<int>(g_.index(i, j, k)));
    return out;
  }

  void extend_add(Eigen::MatrixXcd& F, const Update& u) const {
    const Eigen::Index m = static_cast<Eigen::Index>(u.idx.size());
    std::vector<int> p(m);
    for (Eigen::Index a = 0; a < m; ++a) p[a] = where_[u.idx[a]];
    for (Eigen::Index c = 0; c < m; ++c)
      for (Eigen::Index r = 0; r < m; ++r) F(p[r], p[c]) += u.S(r, c);
  }

  Update process(const Box& box) {
    if (box.volume() <= 0) return {};
    std::vector<Update> kids;
    std::vector<int> elim;
    if (box.volume() <= leaf_) {
      elim = nodes_in(box);
    } else {
      int ax = 0;
      for (int d = 1; d < 3; ++d)
        if (box.hi[d] - box.lo[d] > box.hi[ax] - box.lo[ax]) ax = d;
      int mid = (box.lo[ax] + box.hi[ax]) / 2;
      Box a = box, b = box, s = box;
      a.hi[ax] = mid - 1;
      b.lo[ax] = mid + 1;
      s.lo[ax] = s.hi[ax] = mid;
      kids.push_back(process(a));
      kids.push_back(process(b));
      elim = nodes_in(s);
    }

    // Front = eliminated set followed by every still-active node it touches.
    for (int e : elim) where_[e] = -2;
    std::vector<int> rest;
    auto touch = [&](int j) {
      if (where_[j] == -1 && !eliminated_[j]) {
        where_[j] = -3;
        rest.push_back(j);
      }
    };
    for (auto& u : kids)
      for (int j : u.idx) touch(j);
    for (int e : elim) {
      for (SpMat::InnerIterator it(K_, e); it; ++it) touch(static_cast<int>(it.row()));
      for (RowMat::InnerIterator it(Krow_, e); it; ++it) touch(static_cast<int>(it.col()));
    }
    std::sort(rest.begin(), rest.end());
    const Eigen::Index m = static_cast<Eigen::Index>(elim.size()), r = static_cast<Eigen::Index>(rest.size());
    for (Eigen::Index a = 0; a < m; ++a) where_[elim[a]] = static_cast<int>(a);
    for (Eigen::Index a = 0; a < r; ++a) where_[rest[a]] = static_cast<int>(m + a);

    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(m + r, m + r);
    for (Eigen::Index a = 0; a < m; ++a) {
      int e = elim[a];
      for (RowMat::InnerIterator it(Krow_, e); it; ++it) {
        int p = where_[it.col()];
        if (p >= 0) F(a, p) += it.value();
      }
      for (SpMat::InnerIterator it(K_, e); it; ++it) {
        int p = where_[it.row()];
        if (p >= m) F(p, a) += it.value();
      }
    }
    for (auto& u : kids) extend_add(F, u);
    kids.clear();

    Update out;
    out.idx = rest;
    if (r > 0) {
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(F.topLeftCorner(m, m));
      Eigen::MatrixXcd X = lu.solve(F.topRightCorner(m, r));
      out.S = F.bottomRightCorner(r, r);
      out.S.noalias() -= F.bottomLeftCorner(r, m) * X;
    }
    for (int e : elim) {
      where_[e] = -1;
      eliminated_[e] = 1;
    }
    for (int j : rest) where_[j] = -1;
    return out;
  }

  using RowMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor, int>;
  const Grid& g_;
  SpMat K_;
  RowMat Krow_;
  int leaf_;
  std::vector<char> eliminated_;
  std::vector<int> where_;
};

}  // namespace cgolab
