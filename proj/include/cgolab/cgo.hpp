#pragma once

#include <Eigen/CholmodSupport>

#include <fstream>
#include <optional>

#include "cauchy.hpp"
#include "forward.hpp"

namespace cgolab {

// Orthonormal pair (mu1, mu2) perpendicular to xi. For xi = 0 the first two axes are used.
struct Frame {
  Vec3 mu1{1, 0, 0}, mu2{0, 1, 0};

  Frame flipped() const { return {mu1, {-mu2[0], -mu2[1], -mu2[2]}}; }
};

// Gram-Schmidt from the coordinate axis least aligned with xi (ties go to the smaller index);
// mu2 completes a right-handed triple with xi / |xi|.
inline Frame frame_for(const Vec3& xi) {
  double n = norm3(xi);
  if (n == 0.0) return {};
  Vec3 u{xi[0] / n, xi[1] / n, xi[2] / n};
  int ax = 0;
  for (int d = 1; d < 3; ++d)
    if (std::abs(u[d]) < std::abs(u[ax]) - 1e-12) ax = d;
  Vec3 e{0, 0, 0};
  e[ax] = 1.0;
  double p = dot3(e, u);
  Vec3 m1{e[0] - p * u[0], e[1] - p * u[1], e[2] - p * u[2]};
  double m = norm3(m1);
  for (auto& c : m1) c /= m;
  Vec3 m2{u[1] * m1[2] - u[2] * m1[1], u[2] * m1[0] - u[0] * m1[2], u[0] * m1[1] - u[1] * m1[0]};
  return {m1, m2};
}

// Complex frequency of a solution e^{x.zeta/h}(a + r):
//   sign +1: zeta = i h xi / 2 + mu1 + i s mu2,  sign -1: zeta = i h xi / 2 - mu1 - i s mu2,
// with s = sqrt(1 - h^2 |xi|^2 / 4), so that zeta . zeta = 0 and the product of a +1 and a -1
// solution oscillates like e^{i x.xi}.
struct CGOContext {
  Vec3 xi{0, 0, 0};
  Frame frame;
  double h = 0.1;
  int sign = 1;
  CVec3 zeta{}, zeta0{};

  CVec3 zeta_rest() const { return {zeta[0] - zeta0[0], zeta[1] - zeta0[1], zeta[2] - zeta0[2]}; }

  static CGOContext make(const Vec3& xi, const Frame& fr, double h, int sign) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("CGO context: h must be positive");
    if (sign != 1 && sign != -1) throw ValidationError("CGO context: sign must be +1 or -1");
    double n2 = dot3(xi, xi);
    double disc = 1.0 - h * h * n2 / 4.0;
    if (disc < 0.0) throw ValidationError("CGO context: h |xi| must not exceed 2");
    const double tol = 1e-10;
    if (std::abs(norm3(fr.mu1) - 1) > tol || std::abs(norm3(fr.mu2) - 1) > tol || std::abs(dot3(fr.mu1, fr.mu2)) > tol ||
        std::abs(dot3(fr.mu1, xi)) > tol * (1 + std::sqrt(n2)) || std::abs(dot3(fr.mu2, xi)) > tol * (1 + std::sqrt(n2)))
      throw ValidationError("CGO context: frame must be orthonormal and perpendicular to xi");
    double s = std::sqrt(disc);
    CGOContext c{xi, fr, h, sign, {}, {}};
    const cplx I(0, 1);
    for (int d = 0; d < 3; ++d) {
      c.zeta0[d] = double(sign) * (fr.mu1[d] + I * fr.mu2[d]);
      c.zeta[d] = I * h * xi[d] / 2.0 + double(sign) * (fr.mu1[d] + I * s * fr.mu2[d]);
    }
    return c;
  }

  // zeta = zeta0 = mu1 + i mu2 with no oscillating part.
  static CGOContext plain(const Frame& fr, double h) { return make({0, 0, 0}, fr, h, 1); }
};

// MinimumNorm: the interior equations with the smallest weighted L2 norm among all solutions.
// ZeroDirichlet: r = 0 on the boundary; grows like e^{-x.mu1/h} away from the support of the data.
enum class RemainderSolve { MinimumNorm, ZeroDirichlet };

struct CGOOptions {
  std::optional<double> tau;  // defaults to sqrt(h)
  double plateau = 0.5;
  CauchyOptions cauchy;
  RemainderSolve remainder = RemainderSolve::MinimumNorm;
};

struct CGODiagnostics {
  double h = 0.0, tau = 0.0;
  double transport_residual = 0.0;  // relative residual of the transport equation
  double pde_residual = 0.0;        // relative residual of the amplitude in the conjugated equation
  double solve_residual = 0.0;      // relative residual of a + r after the remainder solve
  double r_h1scl = 0.0;             // (||r||^2 + ||h grad r||^2)^(1/2)
  double r_l2 = 0.0, a_l2 = 0.0;
  double peclet = 0.0;              // |zeta| dx / h
};

// u = e^{x.zeta/h}(a + r) with a = e^{phase}; stored in conjugated form.
struct CGOSolution {
  CGOContext ctx;
  ScalarField phase, a, r;
  CGODiagnostics diag;

  ScalarField amplitude() const { return a + r; }
};

// Mollified coefficient V_tau on the grid extended to the enclosing ball.
struct MollifiedDrift {
  ExtendedGrid ext;
  VectorField V_tau;  // on ext.grid
  double tau = 0.0;

  MollifiedDrift(const VectorField& V, double tau_, double plateau = 0.5) : ext(V.grid()), tau(tau_) {
    V_tau = mollify(extend_to_ball(V, ext), MollifierSpec{tau_, plateau});
  }
  VectorField on(const Grid& base) const { return restrict_to(V_tau, ext, base); }
};

// Phase solving 2 zeta0 . grad phase = zeta0 . V_tau.
inline ScalarField transport_phase(const MollifiedDrift& m, const CVec3& zeta0, const Grid& targets,
                                   const CauchyOptions& opt = {}) {
  ScalarField f = dot(zeta0, m.V_tau);
  ScalarField phase = cauchy_transform(f, zeta0, targets, opt);
  phase *= 0.5;
  return phase;
}

// Relative residual of -2 zeta0 . grad phase + zeta0 . V_tau at depth >= 2, with fourth-order
// differences.
inline double transport_residual(const ScalarField& phase, const VectorField& V_tau, const CVec3& zeta0) {
  ScalarField rhs = dot(zeta0, V_tau);
  ScalarField res = dot(zeta0, gradient_fourth_order(phase));
  res *= -2.0;
  res += rhs;
  double n = l2_norm_interior(rhs, 2);
  return n > 0.0 ? l2_norm_interior(res, 2) / n : l2_norm_interior(res, 2);
}

namespace detail {

// Conjugated operator h^2 e^{-x.zeta/h} P e^{x.zeta/h} applied with grid stencils:
//   -h^2 Lap w - 2h zeta . grad w + h^2 V . grad w + (h zeta . V + h^2 (div W + q)) w.
inline ScalarField apply_conjugated(const OperatorCoefficients& co, const ScalarField& reaction, const CVec3& zeta,
                                    double h, const ScalarField& w) {
  ScalarField out = laplacian(w);
  out *= -h * h;
  auto gw = gradient(w);
  for (std::size_t i = 0; i < w.size(); ++i) {
    cplx zg = 0.0, vg = 0.0, zv = 0.0;
    for (int d = 0; d < 3; ++d) {
      zg += zeta[d] * gw.comp(d)[i];
      vg += co.V.comp(d)[i] * gw.comp(d)[i];
      zv += zeta[d] * co.V.comp(d)[i];
    }
    out[i] += -2.0 * h * zg + h * h * vg + (h * zv + h * h * reaction[i]) * w[i];
  }
  return out;
}

inline double interior_norm_ratio(const ScalarField& num, const ScalarField& den) {
  double d = l2_norm_interior(den, 1);
  double n = l2_norm_interior(num, 1);
  return d > 0.0 ? n / d : n;
}

}  // namespace detail

namespace detail {

// Minimizes sum_k w_k |r_k|^2 subject to the interior rows M r = F, through
// (M W^-1 M^H) y = F and r = W^-1 M^H y.
inline std::vector<cplx> min_norm_solve(const Grid& g, const InteriorSystem& sys, const std::vector<cplx>& F, double h) {
  const int n = static_cast<int>(g.size()), m = static_cast<int>(sys.split.interior.size());
  std::vector<double> isw(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) isw[i] = 1.0 / std::sqrt(g.trapezoid_weight(i));
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(sys.A_II.nonZeros() + sys.A_IB.nonZeros()));
  auto add = [&](const SpMat& B, const std::vector<std::size_t>& cols) {
    for (int k = 0; k < B.outerSize(); ++k)
      for (SpMat::InnerIterator it(B, k); it; ++it) {
        std::size_t c = cols[static_cast<std::size_t>(it.col())];
        t.emplace_back(static_cast<int>(it.row()), static_cast<int>(c), it.value() * isw[c]);
      }
  };
  add(sys.A_II, sys.split.interior);
  add(sys.A_IB, sys.split.boundary);
  SpMat Mw(m, n);
  Mw.setFromTriplets(t.begin(), t.end());
  SpMat S = Mw * Mw.adjoint();
  Eigen::CholmodSupernodalLLT<SpMat, Eigen::Lower> chol;
  chol.compute(S);
  if (chol.info() != Eigen::Success)
    throw NumericalError("CGO: minimum-norm remainder system could not be factored at h = " + std::to_string(h));
  Eigen::Map<const Eigen::VectorXcd> f(F.data(), m);
  Eigen::VectorXcd y = chol.solve(f);
  if (chol.info() != Eigen::Success) throw NumericalError("CGO: minimum-norm remainder solve failed at h = " + std::to_string(h));
  Eigen::VectorXcd z = Mw.adjoint() * y;
  std::vector<cplx> r(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) r[i] = z[static_cast<Eigen::Index>(i)] * isw[i];
  return r;
}

}  // namespace detail

// Builds the solution from a precomputed phase on the operator grid.
inline CGOSolution build_cgo_with_phase(const OperatorCoefficients& co, const CGOContext& ctx, const ScalarField& phase,
                                        double tau = 0.0, RemainderSolve method = RemainderSolve::MinimumNorm) {
  co.validate();
  const Grid& g = co.grid();
  if (!(phase.grid().spec() == g.spec())) throw ValidationError("CGO: phase lives on a different grid");
  const double h = ctx.h;
  ScalarField a = exp(phase);
  if (!all_finite(a)) throw NumericalError("CGO: amplitude overflow");
  const ScalarField reaction = co.reaction();

  VectorField drift(g);
  ScalarField react(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    cplx zv = 0.0;
    for (int d = 0; d < 3; ++d) {
      drift.comp(d)[i] = h * h * co.V.comp(d)[i] - 2.0 * h * ctx.zeta[d];
      zv += ctx.zeta[d] * co.V.comp(d)[i];
    }
    react[i] = h * zv + h * h * reaction[i];
  }
  ScalarField res_a = detail::apply_conjugated(co, reaction, ctx.zeta, h, a);

  CGOSolution sol{ctx, phase, a, ScalarField(g), {}};
  bool trivial = max_abs(res_a) == 0.0;
  if (!trivial) {
    InteriorSystem sys = assemble_interior(g, h * h, &drift, &react, DriftScheme::Centered);
    if (method == RemainderSolve::MinimumNorm) {
      std::vector<cplx> F(sys.split.interior.size());
      for (std::size_t k = 0; k < F.size(); ++k) F[k] = -res_a[sys.split.interior[k]];
      auto r = detail::min_norm_solve(g, sys, F, h);
      for (std::size_t i = 0; i < g.size(); ++i) sol.r[i] = r[i];
    } else {
      SparseLu lu;
      if (!lu.factor(sys.A_II)) throw NumericalError("CGO: remainder system is singular at h = " + std::to_string(h));
      ScalarField src = res_a;
      src *= -1.0;
      sol.r = solve_interior(sys, lu, g, {}, &src);
      for (auto idx : sys.split.boundary) sol.r[idx] = 0.0;
    }
    if (!all_finite(sol.r)) throw NumericalError("CGO: remainder solve produced non-finite values at h = " + std::to_string(h));
  }

  auto& dg = sol.diag;
  dg.h = h;
  dg.tau = tau;
  dg.pde_residual = detail::interior_norm_ratio(res_a, a);
  ScalarField res_u = detail::apply_conjugated(co, reaction, ctx.zeta, h, sol.amplitude());
  dg.solve_residual = trivial ? 0.0 : detail::interior_norm_ratio(res_u, res_a);
  if (dg.solve_residual > 1e-6)
    throw NumericalError("CGO: remainder solve residual " + std::to_string(dg.solve_residual) + " at h = " + std::to_string(h));
  dg.r_h1scl = h1_scl_norm(sol.r, h);
  dg.r_l2 = l2_norm(sol.r);
  dg.a_l2 = l2_norm(a);
  double zn = 0.0;
  for (auto z : ctx.zeta) zn += std::norm(z);
  dg.peclet = std::sqrt(zn) * g.max_spacing() / h;
  return sol;
}

// Full construction: mollify V, solve the transport equation, then the remainder equation.
inline CGOSolution build_cgo(const OperatorCoefficients& co, const CGOContext& ctx, const CGOOptions& opt = {}) {
  const double tau = opt.tau.value_or(std::sqrt(ctx.h));
  MollifiedDrift m(co.V, tau, opt.plateau);
  ScalarField phase = transport_phase(m, ctx.zeta0, co.grid(), opt.cauchy);
  CGOSolution sol = build_cgo_with_phase(co, ctx, phase, tau, opt.remainder);
  sol.diag.transport_residual = transport_residual(phase, m.on(co.grid()), ctx.zeta0);
  return sol;
}

inline void write_diagnostics_csv(const std::string& path, const std::vector<CGODiagnostics>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path);
  os.precision(17);
  os << "h,tau,transport_residual,pde_residual,solve_residual,r_h1scl,r_l2,a_l2,peclet\n";
  for (const auto& d : rows)
    os << d.h << ',' << d.tau << ',' << d.transport_residual << ',' << d.pde_residual << ',' << d.solve_residual << ','
       << d.r_h1scl << ',' << d.r_l2 << ',' << d.a_l2 << ',' << d.peclet << '\n';
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace cgolab
