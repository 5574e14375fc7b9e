#pragma once

#include <Eigen/Dense>
#include <Eigen/CholmodSupport>

#include <algorithm>
#include <cmath>
#include <optional>

#include "fluid.hpp"
#include "log.hpp"
#include "sparse.hpp"

namespace cgolab {

// Coefficient families at two or three distinct frequencies.
struct FrequencySet {
  std::vector<FrequencyPerturbation> entries;

  std::size_t size() const { return entries.size(); }
  const Grid& grid() const { return entries.front().q.grid(); }
  std::vector<double> omegas() const {
    std::vector<double> w;
    for (auto& e : entries) w.push_back(e.omega);
    return w;
  }

  void validate(double min_relative_gap = 1e-3) const {
    if (entries.size() < 2 || entries.size() > 3) throw ValidationError("frequency set: need two or three frequencies");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!(entries[i].omega > 0.0) || !std::isfinite(entries[i].omega)) throw ValidationError("frequency set: frequencies must be positive");
      if (!(entries[i].q.grid().spec() == grid().spec()) || !(entries[i].A.grid().spec() == grid().spec()))
        throw ValidationError("frequency set: coefficients live on different grids");
      for (std::size_t j = 0; j < i; ++j) {
        double a = entries[i].omega, b = entries[j].omega;
        if (std::abs(a - b) <= min_relative_gap * std::max(a, b))
          throw ValidationError("frequency set: frequencies " + std::to_string(b) + " and " + std::to_string(a) +
                                " are too close; the frequency split is ill-conditioned");
      }
    }
  }
};

inline FrequencySet frequency_set(const FluidParameters& p, const std::vector<double>& omegas) {
  FrequencySet s;
  VectorField gr = gradient(real_part(p.rho));
  for (double w : omegas) s.entries.push_back(coefficients_from_fluid(p, w, gr));
  s.validate();
  return s;
}

// q + i div A - A.A, unchanged by gauge transformations.
inline ScalarField gauge_invariant_potential(const VectorField& A, const ScalarField& q) {
  ScalarField div = divergence(A);
  ScalarField out(q.grid());
  const cplx I(0, 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    cplx aa = A.comp(0)[i] * A.comp(0)[i] + A.comp(1)[i] * A.comp(1)[i] + A.comp(2)[i] * A.comp(2)[i];
    out[i] = q[i] + I * div[i] - aa;
  }
  return out;
}

// Gauge transformation with Lap phi discretized as div(grad phi), the composition under which
// gauge_invariant_potential is exactly invariant on the grid.
inline std::pair<VectorField, ScalarField> apply_gauge_composed(const VectorField& A, const ScalarField& q, const ScalarField& phi) {
  VectorField G = gradient(phi);
  ScalarField lap = divergence(G);
  ScalarField q2(q.grid());
  const cplx I(0, 1);
  for (std::size_t i = 0; i < q.size(); ++i) {
    cplx ag = 0, gg = 0;
    for (int d = 0; d < 3; ++d) {
      ag += A.comp(d)[i] * G.comp(d)[i];
      gg += G.comp(d)[i] * G.comp(d)[i];
    }
    q2[i] = q[i] + 2.0 * ag + gg - I * lap[i];
  }
  return {A + G, std::move(q2)};
}

// Frequency set of a fluid with the gauge omega * chi applied at each frequency, the form a
// velocity difference v1/c1^2 - v2/c2^2 = grad chi takes in the coefficients.
inline FrequencySet gauge_perturbed_set(const FluidParameters& p, const std::vector<double>& omegas, const ScalarField& chi) {
  FrequencySet s = frequency_set(p, omegas);
  for (auto& e : s.entries) {
    ScalarField phi = chi;
    phi *= e.omega;
    auto [A, q] = apply_gauge_composed(e.A, e.q, phi);
    e.A = std::move(A);
    e.q = std::move(q);
  }
  return s;
}

// D(w) = q2 - q1 + A1^2 - A2^2 - i div(A1 - A2), which vanishes for gauge-equivalent pairs.
// Re D(w) = w^2 speed_flow + density and Im D(w) / w = drift_absorption(w), with
//   speed_flow       = |v1/c1^2|^2 - |v2/c2^2|^2 - (1/c2^2 - 1/c1^2)
//   density          = div(a1 - a2)/2 - (|a1|^2 - |a2|^2)/4,           a = grad(rho)/rho
//   drift_absorption = w1.a1 - w2.a2 - div(w1 - w2) - 2(alpha2/c2 - alpha1/c1),   w = v/c^2.
struct FrequencySplit {
  std::vector<double> omegas;
  ScalarField speed_flow, density;
  std::vector<ScalarField> drift_absorption;
  std::vector<ScalarField> pair_defect;  // D(w) per frequency
  double power_fit_residual = 0.0;       // max |Re D - (w^2 speed_flow + density)|, nonzero only with three frequencies
};

inline FrequencySplit split_by_frequency(const FrequencySet& first, const FrequencySet& second) {
  first.validate();
  second.validate();
  if (first.omegas() != second.omegas()) throw ValidationError("frequency split: the two families use different frequencies");
  const Grid& g = first.grid();
  if (!(second.grid().spec() == g.spec())) throw ValidationError("frequency split: families live on different grids");
  FrequencySplit out;
  out.omegas = first.omegas();
  const std::size_t m = out.omegas.size();
  for (std::size_t k = 0; k < m; ++k) {
    ScalarField d = gauge_invariant_potential(second.entries[k].A, second.entries[k].q) -
                    gauge_invariant_potential(first.entries[k].A, first.entries[k].q);
    ScalarField da(g);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] = d[i].imag() / out.omegas[k];
    out.drift_absorption.push_back(std::move(da));
    out.pair_defect.push_back(std::move(d));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(m), 2);
  for (std::size_t k = 0; k < m; ++k) {
    M(static_cast<Eigen::Index>(k), 0) = out.omegas[k] * out.omegas[k];
    M(static_cast<Eigen::Index>(k), 1) = 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  auto sv = svd.singularValues();
  if (!(sv[1] > 1e-8 * sv[0])) throw ValidationError("frequency split: frequency-power system is ill-conditioned");
  out.speed_flow = ScalarField(g);
  out.density = ScalarField(g);
  Eigen::VectorXd b(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) b[static_cast<Eigen::Index>(k)] = out.pair_defect[k][i].real();
    Eigen::Vector2d x = svd.solve(b);
    out.speed_flow[i] = x[0];
    out.density[i] = x[1];
    out.power_fit_residual = std::max(out.power_fit_residual, (M * x - b).cwiseAbs().maxCoeff());
  }
  return out;
}

// Least-squares potential of a gradient field: minimizes the sum over grid edges of
// ((u_j - u_i)/h - mean of G along the edge)^2 with u = 0 at the anchor node. The edge Laplacian is
// factored once and reused.
class GradientIntegrator {
 public:
  GradientIntegrator(const Grid& g, std::size_t anchor) : grid_(g), anchor_(anchor) {
    if (anchor >= g.size()) throw ValidationError("gradient integration: anchor node out of range");
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(g.size() * 7);
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto c = g.ijk(i);
      for (int d = 0; d < 3; ++d) {
        if (c[d] + 1 >= g.n(d)) continue;
        auto ii = static_cast<int>(i), jj = static_cast<int>(i + g.stride(d));
        double w = 1.0 / (g.spacing(d) * g.spacing(d));
        t.emplace_back(ii, ii, w);
        t.emplace_back(jj, jj, w);
        t.emplace_back(ii, jj, -w);
        t.emplace_back(jj, ii, -w);
      }
    }
    // The functional is shift invariant, so adding u_anchor^2 pins the constant without changing the shape.
    t.emplace_back(static_cast<int>(anchor), static_cast<int>(anchor), 1.0);
    L_.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
    L_.setFromTriplets(t.begin(), t.end());
    chol_.compute(L_);
    if (chol_.info() != Eigen::Success) throw NumericalError("gradient integration: factorization failed");
  }

  ScalarField operator()(const VectorField& G) const {
    const Grid& g = grid_;
    if (!(G.grid().spec() == g.spec())) throw ValidationError("gradient integration: field lives on another grid");
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto c = g.ijk(i);
      for (int d = 0; d < 3; ++d) {
        if (c[d] + 1 >= g.n(d)) continue;
        std::size_t j = i + g.stride(d);
        cplx e = 0.5 * (G.comp(d)[i] + G.comp(d)[j]) / g.spacing(d);
        auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        b(ii, 0) -= e.real();
        b(jj, 0) += e.real();
        b(ii, 1) -= e.imag();
        b(jj, 1) += e.imag();
      }
    }
    Eigen::MatrixXd x = chol_.solve(b);
    ScalarField u(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto r = static_cast<Eigen::Index>(i);
      u[i] = cplx(x(r, 0), x(r, 1));
    }
    return u;
  }

  std::size_t anchor() const { return anchor_; }

 private:
  Grid grid_;
  std::size_t anchor_;
  Eigen::SparseMatrix<double> L_;
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> chol_;
};

inline ScalarField integrate_gradient(const VectorField& G, std::size_t anchor) { return GradientIntegrator(G.grid(), anchor)(G); }

inline std::size_t nearest_node(const Grid& g, const Vec3& x) {
  int c[3];
  for (int d = 0; d < 3; ++d)
    c[d] = std::clamp(static_cast<int>(std::lround((x[d] - g.spec().lower[d]) / g.spacing(d))), 0, g.n(d) - 1);
  return g.index(c[0], c[1], c[2]);
}

inline double real_range(const ScalarField& f, bool interior_only = false) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (interior_only && f.grid().on_boundary(i)) continue;
    lo = std::min(lo, f[i].real());
    hi = std::max(hi, f[i].real());
  }
  return hi > lo ? hi - lo : 0.0;
}

inline double boundary_range(const ScalarField& f) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.grid().on_boundary(i)) {
      lo = std::min(lo, f[i].real());
      hi = std::max(hi, f[i].real());
    }
  return hi > lo ? hi - lo : 0.0;
}

// Solves -Lap u + b . grad u = source in the interior with constant boundary value, upwinding the drift
// so the discrete maximum principle holds.
inline ScalarField solve_drift(const VectorField& drift, const ScalarField& source, double boundary_value) {
  const Grid& g = source.grid();
  VectorField b(g);
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < g.size(); ++i) b.comp(d)[i] = drift.comp(d)[i].real();
  InteriorSystem sys = assemble_interior(g, 1.0, &b, nullptr, DriftScheme::Upwind);
  SparseLu lu;
  if (!lu.factor(sys.A_II)) throw NumericalError("drift solve: factorization failed");
  std::vector<cplx> bv(sys.split.boundary.size(), cplx(boundary_value, 0.0));
  ScalarField u = solve_interior(sys, lu, g, bv, &source);
  for (auto& z : u.data()) z = z.real();
  return u;
}

struct DensityRatio {
  ScalarField g;            // (log rho1 - log rho2) / 2 from the drift equation
  ScalarField integrated;   // the same from direct integration of Im A1 - Im A2
  double constant = 1.0;    // rho1 / rho2 = e^{2 g}
  double relative_range = 0.0;
  double boundary_mismatch = 0.0;  // max over boundary nodes of |Im A1 - Im A2| / max |Im A|
  double drift_integration_gap = 0.0;
  bool consistent = true;
};

struct DensityOptions {
  // (log rho1 - log rho2) / 2 on the boundary. Im A determines g only up to this constant.
  double boundary_log_ratio = 0.0;
  double trace_tol = 1e-3;
  double constancy_tol = 1e-3;
};

// Im A_j = grad(rho_j)/(2 rho_j). g = u1 - u2 with u_j = log(rho_j)/2 solves
// Lap g - (grad u1 + grad u2) . grad g = div(Im A1 - Im A2) - (|Im A1|^2 - |Im A2|^2) with constant
// boundary data; consistent pairs make the right-hand side vanish and g constant.
inline DensityRatio recover_density_ratio(const VectorField& imA1, const VectorField& imA2, const DensityOptions& opt = {}) {
  const Grid& g = imA1.grid();
  imA1.check(imA2);
  VectorField a1(g), a2(g);
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < g.size(); ++i) {
      a1.comp(d)[i] = imA1.comp(d)[i].real();
      a2.comp(d)[i] = imA2.comp(d)[i].real();
    }
  DensityRatio out;
  double scale = std::max({max_abs(a1), max_abs(a2), 1e-300});
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.on_boundary(i)) continue;
    for (int d = 0; d < 3; ++d) out.boundary_mismatch = std::max(out.boundary_mismatch, std::abs(a1.comp(d)[i] - a2.comp(d)[i]) / scale);
  }
  if (out.boundary_mismatch > opt.trace_tol)
    throw ValidationError("density ratio: boundary traces of grad(rho)/rho differ (relative " + std::to_string(out.boundary_mismatch) + ")");
  VectorField diff = a1 - a2;
  ScalarField rhs = divergence(diff);
  for (std::size_t i = 0; i < g.size(); ++i) {
    cplx s1 = 0, s2 = 0;
    for (int d = 0; d < 3; ++d) {
      s1 += a1.comp(d)[i] * a1.comp(d)[i];
      s2 += a2.comp(d)[i] * a2.comp(d)[i];
    }
    rhs[i] = -(rhs[i] - (s1 - s2));
  }
  out.g = solve_drift(a1 + a2, rhs, opt.boundary_log_ratio);
  GradientIntegrator integrate(g, 0);
  out.integrated = integrate(diff);
  double shift = 0.0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.on_boundary(i)) {
      shift += out.integrated[i].real();
      ++nb;
    }
  shift = opt.boundary_log_ratio - shift / static_cast<double>(nb);
  for (auto& z : out.integrated.data()) z = z.real() + shift;
  out.drift_integration_gap = max_abs(out.g - out.integrated);
  double ref = std::max(1.0, std::max(max_abs(integrate(a1)), max_abs(integrate(a2))));
  out.relative_range = real_range(out.g) / ref;
  out.consistent = out.relative_range < opt.constancy_tol;
  double mean = 0.0;
  for (auto& z : out.g.data()) mean += z.real();
  mean /= static_cast<double>(g.size());
  out.constant = std::exp(2.0 * mean);
  if (!out.consistent)
    warn("density ratio: g is not constant (relative range " + std::to_string(out.relative_range) +
         "); the pair violates the density relation");
  return out;
}

struct VelocitySpeed {
  ScalarField chi;        // drift-elliptic solution with zero boundary data; constant for consistent pairs
  ScalarField gauge;      // integrated Re(A1 - A2)/w minus chi: the real gauge part, up to a constant
  double chi_relative_range = 0.0;
  double flow_trace_mismatch = 0.0;
  double curl_ratio = 0.0;
  ScalarField c;
  VectorField v;
};

struct VelocityOptions {
  double constancy_tol = 1e-3;
  double trace_tol = 1e-3;
  double curl_tol = 0.25;
};

// flow1 = Re A1 / w (possibly a gauge representative), flow2 = v2 / c2^2 of the reference family.
// The real part of the pair gauge is chi + gauge with flow1 - flow2 = grad(chi + gauge); the flow part
// chi solves a . grad chi - Lap chi = drift_term with chi = 0 on the boundary, where drift_term is
// (w1 - w2) . a - div(w1 - w2) as recovered from the frequency split.
inline VelocitySpeed recover_velocity_speed(const VectorField& flow1, const VectorField& flow2, const ScalarField& c2,
                                            const ScalarField& speed_flow, const VectorField& a, const ScalarField& drift_term,
                                            const VelocityOptions& opt = {}) {
  const Grid& g = c2.grid();
  VectorField diff(g);
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < g.size(); ++i) diff.comp(d)[i] = flow1.comp(d)[i].real() - flow2.comp(d)[i].real();
  VelocitySpeed out;
  double jac = jacobian_norm(diff, 1);
  if (jac > 0.0) {
    out.curl_ratio = l2_norm_interior(curl(diff), 1) / jac;
    if (out.curl_ratio > opt.curl_tol)
      throw GaugeObstruction("flow difference is not curl-free (relative curl " + std::to_string(out.curl_ratio) + ")");
  }
  Vec3 ext{};
  for (int d = 0; d < 3; ++d) ext[d] = g.spec().upper[d] - g.spec().lower[d];
  const double scale = std::max(1e-300, std::max(max_abs(flow1), max_abs(flow2)) * norm3(ext));
  ScalarField total = integrate_gradient(diff, 0);
  out.flow_trace_mismatch = boundary_range(total) / scale;
  if (out.flow_trace_mismatch > opt.trace_tol)
    throw ValidationError("velocity: boundary traces of v/c^2 differ (relative " + std::to_string(out.flow_trace_mismatch) + ")");
  ScalarField src(g);
  for (std::size_t i = 0; i < g.size(); ++i) src[i] = drift_term[i].real();
  out.chi = solve_drift(a, src, 0.0);
  out.chi_relative_range = real_range(out.chi) / scale;
  if (out.chi_relative_range > opt.constancy_tol)
    throw GaugeObstruction("gauge obstruction not closed: chi has relative range " + std::to_string(out.chi_relative_range));
  out.gauge = total - out.chi;
  VectorField w1 = flow2 + gradient(out.chi);
  out.c = ScalarField(g);
  out.v = VectorField(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double w1sq = 0, w2sq = 0;
    for (int d = 0; d < 3; ++d) {
      w1sq += std::norm(w1.comp(d)[i].real());
      w2sq += std::norm(flow2.comp(d)[i].real());
    }
    double s2 = 1.0 / (c2[i].real() * c2[i].real());
    // speed_flow = |w1|^2 - |w2|^2 - s2 + s1 is linear in s1 = 1/c1^2 once w1 is fixed
    double s1 = s2 + speed_flow[i].real() - (w1sq - w2sq);
    if (!(s1 > 0.0)) throw NumericalError("velocity: recovered 1/c^2 is not positive at node " + std::to_string(i));
    out.c[i] = 1.0 / std::sqrt(s1);
    for (int d = 0; d < 3; ++d) out.v.comp(d)[i] = w1.comp(d)[i].real() / s1;
  }
  return out;
}

struct Absorption {
  ScalarField drift_term;   // (w1 - w2) . a - div(w1 - w2) part
  ScalarField first, second;  // alpha0_1 / c1 and alpha0_2 / c2 (difference only where the exponents agree)
  std::vector<bool> equal_exponent;
  std::size_t flagged = 0;
};

// Per node, drift_absorption(w) = T + 2 w^{zeta1} x1 - 2 w^{zeta2} x2 for unknowns T, x1, x2. Where
// |zeta1 - zeta2| < exponent_tol only T and x1 - x2 are determined; `second` is then 0 and `first` holds
// the difference. Nodes with condition number above max_condition are filled from their neighbours.
inline Absorption recover_absorption(const FrequencySplit& split, const ScalarField& zeta1, const ScalarField& zeta2,
                                     double exponent_tol = 1e-9, double max_condition = 1e8) {
  const Grid& g = zeta1.grid();
  const std::size_t m = split.omegas.size();
  Absorption out{ScalarField(g), ScalarField(g), ScalarField(g), std::vector<bool>(g.size(), false), 0};
  std::vector<bool> bad(g.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double z1 = zeta1[i].real(), z2 = zeta2[i].real();
    bool eq = std::abs(z1 - z2) < exponent_tol;
    out.equal_exponent[i] = eq;
    const Eigen::Index cols = eq ? 2 : 3;
    if (static_cast<Eigen::Index>(m) < cols)
      throw ValidationError("absorption: distinct exponents need three frequencies (node " + std::to_string(i) + ")");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(m), cols);
    Eigen::VectorXd b(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) {
      auto r = static_cast<Eigen::Index>(k);
      double lw = std::log(split.omegas[k]);
      M(r, 0) = 1.0;
      M(r, 1) = 2.0 * std::exp(z1 * lw);
      if (!eq) M(r, 2) = -2.0 * std::exp(z2 * lw);
      b[r] = split.drift_absorption[k][i].real();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    auto sv = svd.singularValues();
    if (!(sv[cols - 1] > 0.0) || sv[0] / sv[cols - 1] > max_condition) {
      bad[i] = true;
      ++out.flagged;
      continue;
    }
    Eigen::VectorXd x = svd.solve(b);
    out.drift_term[i] = x[0];
    out.first[i] = x[1];
    out.second[i] = eq ? 0.0 : x[2];
  }
  if (out.flagged == g.size()) throw NumericalError("absorption: every node is ill-conditioned");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!bad[i]) continue;
    auto c = g.ijk(i);
    cplx s[3] = {0, 0, 0};
    int cnt = 0;
    for (int d = 0; d < 3; ++d)
      for (int sgn : {-1, 1}) {
        int cc = c[d] + sgn;
        if (cc < 0 || cc >= g.n(d)) continue;
        std::size_t j = sgn > 0 ? i + g.stride(d) : i - g.stride(d);
        if (bad[j]) continue;
        s[0] += out.drift_term[j];
        s[1] += out.first[j];
        s[2] += out.second[j];
        ++cnt;
      }
    if (cnt > 0) {
      out.drift_term[i] = s[0] / double(cnt);
      out.first[i] = s[1] / double(cnt);
      out.second[i] = s[2] / double(cnt);
    }
  }
  if (out.flagged > 0) warn("absorption: " + std::to_string(out.flagged) + " ill-conditioned nodes filled from neighbours");
  return out;
}

struct RecoveredFluid {
  ScalarField c;
  VectorField v;
  ScalarField rho_normalized;  // rho / rho(x_ref)
  ScalarField alpha0;
  std::size_t reference_node = 0;
  // Certificates and residual norms of the frequency relations.
  double chi_relative_range = 0.0;
  double density_relative_range = 0.0;
  double power_fit_residual = 0.0;
  double speed_flow_norm = 0.0, density_norm = 0.0, drift_absorption_norm = 0.0;
};

// Direct inversion of A = w v/c^2 + (i/2) grad(rho)/rho, q = -w^2/c^2 - 2i w^{1+zeta} alpha0 / c for
// exactly known coefficients. zeta is a model input; alpha0 uses the lowest frequency.
inline RecoveredFluid extract_exact(const FrequencySet& data, const ScalarField& zeta, std::size_t reference_node) {
  data.validate();
  const Grid& g = data.grid();
  RecoveredFluid out{ScalarField(g), VectorField(g), ScalarField(g), ScalarField(g), reference_node};
  auto order = data.entries;
  std::sort(order.begin(), order.end(), [](auto& x, auto& y) { return x.omega < y.omega; });
  const auto& lo = order.front();
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = -lo.q[i].real() / (lo.omega * lo.omega);
    if (!(s > 0.0)) throw NumericalError("exact extraction: -Re q / w^2 is not positive at node " + std::to_string(i));
    double c = 1.0 / std::sqrt(s);
    out.c[i] = c;
    for (int d = 0; d < 3; ++d) out.v.comp(d)[i] = lo.A.comp(d)[i].real() / lo.omega * c * c;
    double alpha = -lo.q[i].imag() * c / (2.0 * lo.omega);
    out.alpha0[i] = alpha * std::exp(-zeta[i].real() * std::log(lo.omega));
  }
  // consistency of the other frequencies with the first
  for (auto& e : order)
    for (std::size_t i = 0; i < g.size(); ++i) {
      double s = 1.0 / (out.c[i].real() * out.c[i].real());
      double alpha = out.alpha0[i].real() * std::exp(zeta[i].real() * std::log(e.omega));
      cplx q = -e.omega * e.omega * s - 2.0 * cplx(0, 1) * e.omega * alpha / out.c[i].real();
      out.power_fit_residual = std::max(out.power_fit_residual, std::abs(q - e.q[i]) / std::max(1.0, std::abs(e.q[i])));
    }
  VectorField ima(g);
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < g.size(); ++i) ima.comp(d)[i] = lo.A.comp(d)[i].imag();
  ScalarField u = integrate_gradient(ima, reference_node);
  const double u0 = u[reference_node].real();
  for (std::size_t i = 0; i < g.size(); ++i) out.rho_normalized[i] = std::exp(2.0 * (u[i].real() - u0));
  return out;
}

struct GaugeRobustOptions {
  DensityOptions density;
  VelocityOptions velocity;
};

// Full extraction chain for a family known only up to gauge, against the coefficient family of a reference
// fluid with the same boundary data. Absorption of the recovered fluid uses the exponent field zeta1.
inline RecoveredFluid extract_gauge_robust(const FrequencySet& data, const FluidParameters& reference, const ScalarField& zeta1,
                                           std::size_t reference_node, const GaugeRobustOptions& opt = {}) {
  data.validate();
  const Grid& g = data.grid();
  FrequencySet ref = frequency_set(reference, data.omegas());
  FrequencySplit split = split_by_frequency(data, ref);
  Absorption abs = recover_absorption(split, zeta1, reference.zeta);
  const auto& e0 = data.entries.front();
  const auto& r0 = ref.entries.front();
  VectorField im1(g), im2(g), flow1(g), flow2(g), a(g);
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < g.size(); ++i) {
      im1.comp(d)[i] = e0.A.comp(d)[i].imag();
      im2.comp(d)[i] = r0.A.comp(d)[i].imag();
      flow1.comp(d)[i] = e0.A.comp(d)[i].real() / e0.omega;
      flow2.comp(d)[i] = r0.A.comp(d)[i].real() / r0.omega;
      a.comp(d)[i] = 2.0 * r0.A.comp(d)[i].imag();
    }
  DensityRatio dens = recover_density_ratio(im1, im2, opt.density);
  if (!dens.consistent) throw GaugeObstruction("density relation not closed: g has relative range " + std::to_string(dens.relative_range));
  VelocitySpeed vs = recover_velocity_speed(flow1, flow2, reference.c, split.speed_flow, a, abs.drift_term, opt.velocity);
  RecoveredFluid out{vs.c, vs.v, ScalarField(g), ScalarField(g), reference_node};
  for (std::size_t i = 0; i < g.size(); ++i) {
    double rho = std::exp(2.0 * dens.g[i].real()) * reference.rho[i].real();
    out.rho_normalized[i] = rho;
    double x1 = abs.equal_exponent[i] ? abs.first[i].real() + reference.alpha0[i].real() / reference.c[i].real() : abs.first[i].real();
    out.alpha0[i] = x1 * vs.c[i].real();
  }
  cplx r = out.rho_normalized[reference_node];
  for (auto& z : out.rho_normalized.data()) z /= r;
  out.chi_relative_range = vs.chi_relative_range;
  out.density_relative_range = dens.relative_range;
  out.power_fit_residual = split.power_fit_residual;
  out.speed_flow_norm = l2_norm(split.speed_flow);
  out.density_norm = l2_norm(split.density);
  for (auto& f : split.drift_absorption) out.drift_absorption_norm = std::max(out.drift_absorption_norm, l2_norm(f));
  return out;
}

}  // namespace cgolab
