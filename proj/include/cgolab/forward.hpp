#pragma once

#include <Eigen/Dense>

#include "field_io.hpp"
#include "fluid.hpp"
#include "schur.hpp"

namespace cgolab {

// Coefficients of P u = -Lap u + V . grad u + (div W) u + q u.
struct OperatorCoefficients {
  VectorField V, W;
  ScalarField q;

  const Grid& grid() const { return q.grid(); }

  // L_{A,q}: V = -2iA, W = 0.
  static OperatorCoefficients magnetic(const VectorField& A, const ScalarField& q) {
    return {-2.0 * cplx(0, 1) * A, VectorField(A.grid()), q};
  }
  // Transposed magnetic operator: V = W = 2iA.
  static OperatorCoefficients magnetic_transpose(const VectorField& A, const ScalarField& q) {
    VectorField V = 2.0 * cplx(0, 1) * A;
    return {V, V, q};
  }
  static OperatorCoefficients laplace(const Grid& g) { return {VectorField(g), VectorField(g), ScalarField(g)}; }

  // Zeroth-order term div W + q with the grid divergence.
  ScalarField reaction() const { return divergence(W) + q; }

  void validate() const {
    V.check(W);
    if (!(V.grid().spec() == q.grid().spec())) throw ValidationError("operator coefficients: grids do not match");
    if (!all_finite(V) || !all_finite(W) || !all_finite(q)) throw ValidationError("operator coefficients: non-finite samples");
  }
};

// Discrete bilinear form on all nodes:
//   a(u, v) = sum_edges w_e (u_b - u_a)(v_b - v_a)/dx^2 + sum_nodes w_k [(V . grad u)_k + c_k u_k] v_k
// with trapezoid weights. At interior nodes a(u, e_k) is the cell volume times the
// seven-point equation, so boundary rows give the discrete Neumann data.
inline SpMat assemble_bilinear_form(const OperatorCoefficients& co) {
  co.validate();
  const Grid& g = co.grid();
  const ScalarField c = co.reaction();
  std::vector<Triplet> t;
  t.reserve(g.size() * 20);
  const double dv = g.cell_volume();
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    auto ijk = g.ijk(idx);
    for (int d = 0; d < 3; ++d) {
      if (ijk[d] == g.n(d) - 1) continue;
      double w = dv;
      for (int e = 0; e < 3; ++e)
        if (e != d && (ijk[e] == 0 || ijk[e] == g.n(e) - 1)) w *= 0.5;
      double s = w / (g.spacing(d) * g.spacing(d));
      std::size_t nb = idx + g.stride(d);
      t.emplace_back(static_cast<int>(idx), static_cast<int>(idx), s);
      t.emplace_back(static_cast<int>(nb), static_cast<int>(nb), s);
      t.emplace_back(static_cast<int>(idx), static_cast<int>(nb), -s);
      t.emplace_back(static_cast<int>(nb), static_cast<int>(idx), -s);
    }
    double wk = g.trapezoid_weight(idx);
    t.emplace_back(static_cast<int>(idx), static_cast<int>(idx), wk * c[idx]);
    for (int d = 0; d < 3; ++d) {
      cplx vd = co.V.comp(d)[idx];
      if (vd == 0.0) continue;
      Stencil1D st = first_derivative_stencil(ijk[d], g.n(d), g.spacing(d));
      for (int m = 0; m < st.count; ++m) {
        auto col = static_cast<std::ptrdiff_t>(idx) + st.off[m] * static_cast<std::ptrdiff_t>(g.stride(d));
        t.emplace_back(static_cast<int>(idx), static_cast<int>(col), wk * vd * st.w[m]);
      }
    }
  }
  SpMat K(static_cast<int>(g.size()), static_cast<int>(g.size()));
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  return K;
}

// a(u, v) for full-grid fields, v being the test function.
inline cplx bilinear_form(const SpMat& K, const ScalarField& u, const ScalarField& v) {
  auto Ku = multiply(K, u.data());
  cplx s = 0.0;
  for (std::size_t i = 0; i < Ku.size(); ++i) s += Ku[i] * v[i];
  return s;
}

// Interior block of the bilinear form with the coupling to boundary values.
struct DirichletProblem {
  NodeSplit split;
  SpMat K_II, K_IB;
  SparseLu lu;
  double cell_volume = 1.0;

  explicit DirichletProblem(const OperatorCoefficients& co) : split(co.grid()) {
    const Grid& g = co.grid();
    SpMat K = assemble_bilinear_form(co);
    build(g, K);
  }
  DirichletProblem(const Grid& g, const SpMat& K) : split(g) { build(g, K); }

  // Solves P u = source in the interior with u = f on the boundary.
  ScalarField solve(const Grid& g, const std::vector<cplx>& f, const ScalarField* source = nullptr) const {
    std::vector<cplx> rhs(split.interior.size(), 0.0);
    if (!f.empty()) {
      rhs = multiply(K_IB, f);
      for (auto& z : rhs) z = -z;
    }
    if (source)
      for (std::size_t r = 0; r < rhs.size(); ++r) rhs[r] += cell_volume * (*source)[split.interior[r]];
    auto x = lu.solve(rhs);
    ScalarField u(g);
    for (std::size_t r = 0; r < x.size(); ++r) u[split.interior[r]] = x[r];
    for (std::size_t b = 0; b < split.boundary.size() && !f.empty(); ++b) u[split.boundary[b]] = f[b];
    return u;
  }

 private:
  void build(const Grid& g, const SpMat& K) {
    cell_volume = g.cell_volume();
    const int ni = static_cast<int>(split.interior.size()), nb = static_cast<int>(split.boundary.size());
    std::vector<Triplet> tii, tib;
    for (int c = 0; c < K.outerSize(); ++c) {
      if (g.on_boundary(static_cast<std::size_t>(c))) {
        for (SpMat::InnerIterator it(K, c); it; ++it)
          if (!g.on_boundary(static_cast<std::size_t>(it.row())))
            tib.emplace_back(split.pos[it.row()], split.pos[c], it.value());
      } else {
        for (SpMat::InnerIterator it(K, c); it; ++it)
          if (!g.on_boundary(static_cast<std::size_t>(it.row())))
            tii.emplace_back(split.pos[it.row()], split.pos[c], it.value());
      }
    }
    K_II.resize(ni, ni);
    K_II.setFromTriplets(tii.begin(), tii.end());
    K_IB.resize(ni, nb);
    K_IB.setFromTriplets(tib.begin(), tib.end());
    if (!lu.factor(K_II) || !(lu.rcond() > 1e-14))
      throw AssumptionViolation("interior problem is singular or nearly singular (reciprocal condition " +
                                std::to_string(lu.rcond()) + ")");
    double ratio = singular_ratio();
    if (!(ratio > 1e-10))
      throw AssumptionViolation("interior problem is nearly singular (sigma_min / norm estimate " +
                                std::to_string(ratio) + ")");
  }

  // A few inverse iterations against a cheap norm bound; a singular operator shows up at once.
  double singular_ratio() const {
    const int n = static_cast<int>(K_II.rows());
    if (n == 0) return 1.0;
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(n), rowsum = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < K_II.outerSize(); ++c)
      for (SpMat::InnerIterator it(K_II, c); it; ++it) {
        colsum[c] += std::abs(it.value());
        rowsum[it.row()] += std::abs(it.value());
      }
    double norm = std::sqrt(colsum.maxCoeff() * rowsum.maxCoeff());
    std::vector<cplx> x(n);
    for (int i = 0; i < n; ++i) x[i] = cplx(std::cos(0.7 * i + 0.3), std::sin(1.3 * i + 0.1));
    double mu = 1.0;
    for (int it = 0; it < 4; ++it) {
      double nx = vec_norm(x);
      for (auto& z : x) z /= nx;
      x = lu.solve(lu.solve(x, true));
      mu = vec_norm(x);
      if (!std::isfinite(mu)) return 0.0;
    }
    return 1.0 / (std::sqrt(mu) * norm);
  }
};

inline ScalarField solve_dirichlet(const OperatorCoefficients& co, const BoundaryFunction& f,
                                   const ScalarField* source = nullptr) {
  if (!(f.grid.spec() == co.grid().spec()) || f.values.size() != f.nodes.size())
    throw ValidationError("Dirichlet data does not match the operator grid");
  DirichletProblem p(co);
  return p.solve(co.grid(), f.values, source);
}

// Discrete Dirichlet-to-Neumann map in the weak sense: entry (i, j) = a(u_j, e_i) where u_j
// solves the interior problem with unit data at boundary node j.
struct DtNMap {
  Grid grid;
  std::vector<std::size_t> nodes;
  Eigen::MatrixXcd matrix;

  std::vector<cplx> apply(const std::vector<cplx>& f) const {
    Eigen::Map<const Eigen::VectorXcd> fm(f.data(), static_cast<Eigen::Index>(f.size()));
    Eigen::VectorXcd y = matrix * fm;
    return {y.data(), y.data() + y.size()};
  }
  // g^T Lambda f, the bilinear boundary pairing.
  cplx pairing(const std::vector<cplx>& g, const std::vector<cplx>& f) const {
    auto lf = apply(f);
    cplx s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * lf[i];
    return s;
  }
  io::BoundaryMatrix to_boundary_matrix() const {
    io::BoundaryMatrix m{grid, nodes, {}};
    m.entries.assign(matrix.data(), matrix.data() + matrix.size());
    return m;
  }
  static DtNMap from_boundary_matrix(const io::BoundaryMatrix& m) {
    DtNMap d{m.grid, m.nodes, Eigen::MatrixXcd(m.nodes.size(), m.nodes.size())};
    std::copy(m.entries.begin(), m.entries.end(), d.matrix.data());
    return d;
  }
};

enum class DtNMethod { Multifrontal, ColumnSolves };

inline DtNMap assemble_dtn(const OperatorCoefficients& co, DtNMethod method = DtNMethod::Multifrontal) {
  const Grid& g = co.grid();
  SpMat K = assemble_bilinear_form(co);
  DtNMap out{g, g.boundary_nodes(), {}};
  if (method == DtNMethod::Multifrontal) {
    // Factor once through the ordinary path so singular problems are reported the same way.
    DirichletProblem check(g, K);
    out.matrix = BoundarySchur(g, K).compute();
  } else {
    DirichletProblem p(g, K);
    const std::size_t nb = out.nodes.size();
    out.matrix.resize(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
    std::vector<cplx> f(nb, 0.0);
    for (std::size_t j = 0; j < nb; ++j) {
      f[j] = 1.0;
      ScalarField u = p.solve(g, f);
      f[j] = 0.0;
      auto Ku = multiply(K, u.data());
      for (std::size_t i = 0; i < nb; ++i) out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Ku[out.nodes[i]];
    }
  }
  for (Eigen::Index i = 0; i < out.matrix.size(); ++i)
    if (!std::isfinite(out.matrix.data()[i].real()) || !std::isfinite(out.matrix.data()[i].imag()))
      throw NumericalError("DtN map has non-finite entries");
  return out;
}

inline DtNMap assemble_dtn(const VectorField& A, const ScalarField& q, DtNMethod method = DtNMethod::Multifrontal) {
  return assemble_dtn(OperatorCoefficients::magnetic(A, q), method);
}

// Relative Frobenius distance between two DtN maps.
inline double dtn_distance(const DtNMap& a, const DtNMap& b) {
  if (a.nodes != b.nodes) throw ValidationError("DtN maps live on different boundaries");
  return (a.matrix - b.matrix).norm() / std::max(a.matrix.norm(), 1e-300);
}

struct AssumptionScreen {
  double sigma_min = 0.0;
  double norm = 0.0;
  bool suspect = true;
  std::string message;
};

// Estimates the extreme singular values of the interior operator (rows scaled by the cell
// volume) by power and inverse power iteration.
inline AssumptionScreen screen_assumption_A(const OperatorCoefficients& co, int iterations = 30,
                                            double threshold = 1e-8) {
  const Grid& g = co.grid();
  SpMat K = assemble_bilinear_form(co);
  NodeSplit split(g);
  std::vector<Triplet> t;
  for (int c = 0; c < K.outerSize(); ++c) {
    if (g.on_boundary(static_cast<std::size_t>(c))) continue;
    for (SpMat::InnerIterator it(K, c); it; ++it)
      if (!g.on_boundary(static_cast<std::size_t>(it.row())))
        t.emplace_back(split.pos[it.row()], split.pos[c], it.value() / g.cell_volume());
  }
  const int n = static_cast<int>(split.interior.size());
  SpMat M(n, n);
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();

  AssumptionScreen out;
  std::vector<cplx> x(n);
  for (int i = 0; i < n; ++i) x[i] = cplx(std::cos(0.7 * i + 0.3), std::sin(1.3 * i + 0.1));
  double nx = vec_norm(x);
  for (auto& z : x) z /= nx;
  double lam = 0.0;
  for (int it = 0; it < iterations; ++it) {
    auto y = multiply_adjoint(M, multiply(M, x));
    lam = vec_norm(y);
    for (int i = 0; i < n; ++i) x[i] = y[i] / lam;
  }
  out.norm = std::sqrt(lam);

  SparseLu lu;
  if (!lu.factor(M)) {
    out.sigma_min = 0.0;
    out.suspect = true;
    out.message = "factorization reported a singular interior operator";
    return out;
  }
  for (int i = 0; i < n; ++i) x[i] = cplx(std::sin(0.37 * i + 0.2), std::cos(0.91 * i));
  nx = vec_norm(x);
  for (auto& z : x) z /= nx;
  double mu = 0.0;
  for (int it = 0; it < iterations; ++it) {
    auto y = lu.solve(lu.solve(x, true));
    mu = vec_norm(y);
    if (!std::isfinite(mu)) {
      mu = std::numeric_limits<double>::infinity();
      break;
    }
    for (int i = 0; i < n; ++i) x[i] = y[i] / mu;
  }
  out.sigma_min = std::isfinite(mu) && mu > 0 ? 1.0 / std::sqrt(mu) : 0.0;
  out.suspect = out.sigma_min < threshold * out.norm;
  out.message = out.suspect ? "smallest singular value below threshold: zero may be a Dirichlet eigenvalue"
                            : "interior operator well separated from singular";
  return out;
}

}  // namespace cgolab
