#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <sstream>

#include "forward.hpp"

namespace cgolab {

// Local frame of a box face: tangential axes t[0] < t[1] and the axis normal to the face.
struct FaceFrame {
  int axis = 2;
  int side = 0;  // 0: lower face (inward normal +e_axis), 1: upper face
  std::array<int, 2> t{0, 1};

  static FaceFrame make(int axis, int side) {
    if (axis < 0 || axis > 2 || (side != 0 && side != 1)) throw ValidationError("probe: face axis must be 0..2 and side 0 or 1");
    FaceFrame f{axis, side, {}};
    int k = 0;
    for (int d = 0; d < 3; ++d)
      if (d != axis) f.t[k++] = d;
    return f;
  }
  double inward() const { return side == 0 ? 1.0 : -1.0; }
};

// Oscillating, concentrating Dirichlet data
//   v0(x) = eta((x - x0) / lambda^{1/2}) e^{(i / lambda)(tau' . x' + i x_n)}
// in the coordinates of a face (x' tangential, x_n the inward normal distance).
struct ProbeSpec {
  Vec3 x0{0.5, 0.5, 0.0};
  FaceFrame face = FaceFrame::make(2, 0);
  std::array<double, 2> tau_prime{1.0, 0.0};
  double lambda = 0.1;
  double eta_radius = 0.5;  // support radius of eta in scaled variables, per axis

  void validate(const DomainSpec& box) const {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ValidationError("probe: lambda must lie in (0, 1)");
    if (!(eta_radius > 0.0)) throw ValidationError("probe: eta radius must be positive");
    double plane = face.side == 0 ? box.lower[face.axis] : box.upper[face.axis];
    if (std::abs(x0[face.axis] - plane) > 1e-12 * (1.0 + std::abs(plane)))
      throw ValidationError("probe: x0 does not lie on the selected face");
    double guard = 2.0 * eta_radius * std::sqrt(lambda);
    for (int d : face.t)
      if (x0[d] - box.lower[d] < guard - 1e-12 || box.upper[d] - x0[d] < guard - 1e-12)
        throw ValidationError("probe: x0 is closer than 2 supp(eta) lambda^{1/2} to a face edge");
    double tn = std::hypot(tau_prime[0], tau_prime[1]);
    if (std::abs(tn - 1.0) > 1e-12)
      throw ValidationError("probe: tau' must be a unit tangent vector (e^{(i tau'.x' - x_n)/lambda} is harmonic only then)");
  }
};

namespace detail {

inline double eta_profile(double s, double radius) { return s < radius ? std::exp(1.0 - 1.0 / (1.0 - (s / radius) * (s / radius))) : 0.0; }

// Tensor bump of the scaled local coordinates.
inline double eta_tensor(const Vec3& y, double radius) {
  return eta_profile(std::abs(y[0]), radius) * eta_profile(std::abs(y[1]), radius) * eta_profile(std::abs(y[2]), radius);
}

}  // namespace detail

// v0 on the grid, with eta scaled so that the trapezoid sum over the face of eta(x'/lambda^{1/2}, 0)^2
// equals lambda^{(n-1)/2}, the discrete form of the unit normalization.
inline ScalarField probe_data(const Grid& g, const ProbeSpec& p) {
  p.validate(g.spec());
  const double sl = std::sqrt(p.lambda);
  auto local = [&](const Vec3& x) {
    return Vec3{x[p.face.t[0]] - p.x0[p.face.t[0]], x[p.face.t[1]] - p.x0[p.face.t[1]],
                p.face.inward() * (x[p.face.axis] - p.x0[p.face.axis])};
  };
  double mass = 0.0;
  const int na = p.face.axis;
  const int layer = p.face.side == 0 ? 0 : g.n(na) - 1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.ijk(i);
    if (c[na] != layer) continue;
    double w = 1.0;
    for (int d : p.face.t) w *= g.spacing(d) * ((c[d] == 0 || c[d] == g.n(d) - 1) ? 0.5 : 1.0);
    Vec3 y = local(g.point(i));
    double e = detail::eta_tensor({y[0] / sl, y[1] / sl, 0.0}, p.eta_radius);
    mass += w * e * e;
  }
  if (!(mass > 0.0)) throw ValidationError("probe: eta support contains no face nodes; refine the grid or enlarge lambda");
  const double scale = std::sqrt(p.lambda / mass);  // lambda^{(n-1)/2} = lambda for n = 3
  ScalarField v0(g);
  const cplx I(0, 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 y = local(g.point(i));
    if (y[2] < 0.0) continue;
    double e = detail::eta_tensor({y[0] / sl, y[1] / sl, y[2] / sl}, p.eta_radius);
    if (e == 0.0) continue;
    cplx phase = (I / p.lambda) * (p.tau_prime[0] * y[0] + p.tau_prime[1] * y[1] + I * y[2]);
    v0[i] = scale * e * std::exp(phase);
  }
  return v0;
}

struct ProbeResult {
  double lambda = 0.0;
  cplx value = 0.0;   // lambda^{-(n-1)/2} integral of [-2i (A . grad u) + q u] conj(v)
  cplx q_term = 0.0;  // lambda^{-(n-1)/2} integral of q u conj(v)
  double v0_l2 = 0.0, v1_l2 = 0.0, w_l2 = 0.0, w_h1 = 0.0;
  // lambda^{-(n-1)/2} ||q||_inf (||v0|| + ||w||_{H1})(||v0|| + ||v1||), the bound chain for the q-term.
  double q_bound = 0.0;
};

// Laplacian side of the probe: harmonic extensions v = v0 + v1 and the calibration forms.
class ProbeReference {
 public:
  explicit ProbeReference(const Grid& g)
      : grid_(g), laplace_(OperatorCoefficients::laplace(g)), K0_(assemble_bilinear_form(OperatorCoefficients::laplace(g))) {
    for (int d = 0; d < 3; ++d) {
      VectorField e(g);
      for (std::size_t i = 0; i < g.size(); ++i) e.comp(d)[i] = 1.0;
      unit_[d] = assemble_bilinear_form(OperatorCoefficients::magnetic(e, ScalarField(g))) - K0_;
    }
  }

  const Grid& grid() const { return grid_; }
  const SpMat& laplace_form() const { return K0_; }

  ScalarField harmonic(const ScalarField& v0) const { return laplace_.solve(grid_, BoundaryFunction::trace(v0).values); }

  // Linearized probe value for the constant field e_d, d = 0, 1, 2: lambda^{-1} conj(v)^T (K_{e_d} - K_0) v.
  // It is exactly linear in A and has the same lambda -> 0 limit as the probe itself.
  Eigen::RowVector3cd calibration(const ProbeSpec& p) const {
    ScalarField v = harmonic(probe_data(grid_, p));
    ScalarField vb = conj(v);
    Eigen::RowVector3cd row;
    for (int d = 0; d < 3; ++d) row[d] = bilinear_form(unit_[d], v, vb) / p.lambda;
    return row;
  }

 private:
  Grid grid_;
  DirichletProblem laplace_;
  SpMat K0_;
  std::array<SpMat, 3> unit_;
};

// Factorized L_{A,q} for repeated probes. Forward solves u = v0 + w (L_{A,q} u = 0) and v = v0 + v1
// (Lap v = 0) share the data v0. The integral uses the first-order and reaction part of the discrete
// bilinear form, so it equals lambda^{-1} conj(f)^T (Lambda_{A,q} - Lambda_0) f exactly.
class ProbeOperator {
 public:
  ProbeOperator(const VectorField& A, const ScalarField& q, std::shared_ptr<const ProbeReference> ref = nullptr)
      : q_(q),
        ref_(ref ? std::move(ref) : std::make_shared<ProbeReference>(q.grid())),
        problem_(OperatorCoefficients::magnetic(A, q)),
        diff_(assemble_bilinear_form(OperatorCoefficients::magnetic(A, q)) - ref_->laplace_form()) {
    if (!(ref_->grid().spec() == q.grid().spec())) throw ValidationError("probe: reference grid differs from the coefficient grid");
  }

  const ProbeReference& reference() const { return *ref_; }
  std::shared_ptr<const ProbeReference> shared_reference() const { return ref_; }

  ProbeResult probe(const ProbeSpec& p) const {
    const Grid& g = q_.grid();
    ScalarField v0 = probe_data(g, p);
    ScalarField u = problem_.solve(g, BoundaryFunction::trace(v0).values);
    ScalarField v = ref_->harmonic(v0);
    ScalarField vb = conj(v);
    const double norm = 1.0 / p.lambda;
    ProbeResult r;
    r.lambda = p.lambda;
    r.value = norm * bilinear_form(diff_, u, vb);
    cplx qt = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) qt += g.trapezoid_weight(i) * q_[i] * u[i] * vb[i];
    r.q_term = norm * qt;
    ScalarField w = u - v0, v1 = v - v0;
    r.v0_l2 = l2_norm(v0);
    r.v1_l2 = l2_norm(v1);
    r.w_l2 = l2_norm(w);
    r.w_h1 = h1_norm(w);
    r.q_bound = norm * max_abs(q_) * (r.v0_l2 + r.w_h1) * (r.v0_l2 + r.v1_l2);
    return r;
  }

 private:
  ScalarField q_;
  std::shared_ptr<const ProbeReference> ref_;
  DirichletProblem problem_;
  SpMat diff_;
};

inline ProbeResult probe_value(const VectorField& A, const ScalarField& q, const ProbeSpec& p) {
  return ProbeOperator(A, q).probe(p);
}

// Same value from boundary data only.
inline cplx probe_value(const DtNMap& dtn, const DtNMap& dtn_laplace, const ProbeSpec& p) {
  if (dtn.nodes != dtn_laplace.nodes) throw ValidationError("probe: DtN maps live on different boundaries");
  ScalarField v0 = probe_data(dtn.grid, p);
  std::vector<cplx> f, fb;
  for (auto idx : dtn.nodes) {
    f.push_back(v0[idx]);
    fb.push_back(std::conj(v0[idx]));
  }
  return (dtn.pairing(fb, f) - dtn_laplace.pairing(fb, f)) / p.lambda;
}

// Least-squares fit value(lambda) = a + b lambda^{1/2}; returns a.
inline cplx extrapolate_probe(const std::vector<double>& lambdas, const std::vector<cplx>& values) {
  if (lambdas.size() != values.size() || lambdas.size() < 2) throw ValidationError("probe: extrapolation needs two or more ladder values");
  const auto m = static_cast<Eigen::Index>(lambdas.size());
  Eigen::MatrixXcd M(m, 2);
  Eigen::VectorXcd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    M(i, 0) = 1.0;
    M(i, 1) = std::sqrt(lambdas[static_cast<std::size_t>(i)]);
    b[i] = values[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXcd x = M.colPivHouseholderQr().solve(b);
  return x[0];
}

// Log-log slope of a positive quantity over a ladder (least squares).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope needs two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw ValidationError("slope needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

struct TraceOptions {
  std::vector<double> lambda_ladder{0.2, 0.1, 0.05};
  double eta_radius = 0.5;
  // Successive per-lambda estimates must contract: |e3 - e2| <= ratio_max |e2 - e1| + abs_tol (1 + |e|).
  double ratio_max = 1.0;
  double abs_tol = 1e-3;

  void validate() const {
    if (lambda_ladder.size() < 2) throw ValidationError("probe: lambda ladder needs two or more entries");
    for (std::size_t i = 0; i < lambda_ladder.size(); ++i) {
      if (!(lambda_ladder[i] > 0.0 && lambda_ladder[i] < 1.0)) throw ValidationError("probe: lambda ladder entries must lie in (0, 1)");
      if (i > 0 && !(lambda_ladder[i] < lambda_ladder[i - 1])) throw ValidationError("probe: lambda ladder must be strictly decreasing");
    }
  }
};

struct TraceRecovery {
  CVec3 trace{};                        // A(x0) in world components
  std::vector<double> lambdas;
  std::vector<CVec3> estimates;         // calibrated per-lambda estimates
  std::vector<std::array<cplx, 3>> values;  // raw probe values per lambda for the tangent triple
};

// Probe data source: a callable returning the probe value for a spec.
using ProbeSource = std::function<cplx(const ProbeSpec&)>;

// Tangent triple {t1, t2, -t1}: tau' = 0 is not admissible (e^{-x_n / lambda} is not harmonic), so the
// normal part comes from the pair t1, -t1 and the second tangential part from t2.
inline TraceRecovery recover_trace(const ProbeSource& source, const ProbeReference& ref, const Vec3& x0, const FaceFrame& face,
                                   const TraceOptions& opt = {}) {
  opt.validate();
  const std::array<std::array<double, 2>, 3> taus{{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}}};
  TraceRecovery out;
  out.lambdas = opt.lambda_ladder;
  for (double lambda : opt.lambda_ladder) {
    Eigen::Matrix3cd M;
    Eigen::Vector3cd b;
    std::array<cplx, 3> raw{};
    for (int k = 0; k < 3; ++k) {
      ProbeSpec p;
      p.x0 = x0;
      p.face = face;
      p.tau_prime = taus[static_cast<std::size_t>(k)];
      p.lambda = lambda;
      p.eta_radius = opt.eta_radius;
      raw[static_cast<std::size_t>(k)] = source(p);
      b[k] = raw[static_cast<std::size_t>(k)];
      M.row(k) = ref.calibration(p);
    }
    Eigen::FullPivLU<Eigen::Matrix3cd> lu(M);
    if (!lu.isInvertible()) throw NumericalError("probe: calibration system is singular at lambda = " + std::to_string(lambda));
    Eigen::Vector3cd a = lu.solve(b);
    out.estimates.push_back({a[0], a[1], a[2]});
    out.values.push_back(raw);
  }
  std::ostringstream report;
  for (int d = 0; d < 3; ++d) {
    std::vector<cplx> comp;
    for (auto& e : out.estimates) comp.push_back(e[static_cast<std::size_t>(d)]);
    out.trace[static_cast<std::size_t>(d)] = extrapolate_probe(out.lambdas, comp);
    for (std::size_t i = 2; i < comp.size(); ++i) {
      double prev = std::abs(comp[i - 1] - comp[i - 2]), cur = std::abs(comp[i] - comp[i - 1]);
      if (cur > opt.ratio_max * prev + opt.abs_tol * (1.0 + std::abs(comp[i]))) {
        for (std::size_t j = 0; j < comp.size(); ++j) report << " lambda=" << out.lambdas[j] << ": " << comp[j];
        throw NumericalError("probe: extrapolation of component " + std::to_string(d) + " does not converge;" + report.str());
      }
    }
  }
  return out;
}

inline TraceRecovery recover_trace(const ProbeOperator& op, const Vec3& x0, const FaceFrame& face, const TraceOptions& opt = {}) {
  return recover_trace([&](const ProbeSpec& p) { return op.probe(p).value; }, op.reference(), x0, face, opt);
}

inline TraceRecovery recover_trace(const DtNMap& dtn, const DtNMap& dtn_laplace, const ProbeReference& ref, const Vec3& x0,
                                   const FaceFrame& face, const TraceOptions& opt = {}) {
  return recover_trace([&](const ProbeSpec& p) { return probe_value(dtn, dtn_laplace, p); }, ref, x0, face, opt);
}

// Face centre of a box face.
inline Vec3 face_center(const DomainSpec& box, const FaceFrame& face) {
  Vec3 c;
  for (int d = 0; d < 3; ++d) c[d] = 0.5 * (box.lower[d] + box.upper[d]);
  c[face.axis] = face.side == 0 ? box.lower[face.axis] : box.upper[face.axis];
  return c;
}

}  // namespace cgolab
