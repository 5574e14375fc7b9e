#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "cgo.hpp"
#include "forward.hpp"
#include "log.hpp"
#include "sparse.hpp"

namespace cgolab {

struct MagneticCoefficients {
  VectorField A;
  ScalarField q;

  const Grid& grid() const { return q.grid(); }
};

struct PairingSample {
  Vec3 xi{0, 0, 0};
  Frame frame;
  double h = 0.0;
  cplx value = 0.0;
  double r1_h1scl = 0.0, r2_h1scl = 0.0;  // remainder sizes of the two solutions
};

namespace detail {

inline CVec3 null_vector(const Frame& fr) {
  return {cplx(fr.mu1[0], fr.mu2[0]), cplx(fr.mu1[1], fr.mu2[1]), cplx(fr.mu1[2], fr.mu2[2])};
}

inline ScalarField plane_wave(const Grid& g, const Vec3& xi) {
  ScalarField e(g);
  for (std::size_t i = 0; i < g.size(); ++i) e[i] = std::exp(cplx(0, dot3(g.point(i), xi)));
  return e;
}

}  // namespace detail

// h * integral of [2i (A2 - A1) . grad u1 + (q1 - q2) u1] u2 for u1 = e^{x.zeta1/h} w1 (sign +1)
// and u2 = e^{x.zeta2/h} w2 (sign -1). Since zeta1 + zeta2 = i h xi, the integrand is
//   e^{i x.xi} [2i (A2 - A1) . (zeta1 w1 + h grad w1) w2 + h (q1 - q2) w1 w2].
inline cplx pairing_integral(const VectorField& dA, const ScalarField& dq, const CGOSolution& s1, const CGOSolution& s2) {
  const Grid& g = dq.grid();
  if (s1.ctx.sign != 1 || s2.ctx.sign != -1) throw ValidationError("pairing: expected a +1 and a -1 solution");
  const double h = s1.ctx.h;
  ScalarField w1 = s1.amplitude(), w2 = s2.amplitude();
  auto gw1 = gradient_fourth_order(w1);
  ScalarField e = detail::plane_wave(g, s1.ctx.xi);
  const cplx I(0, 1);
  ScalarField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    cplx s = 0.0;
    for (int d = 0; d < 3; ++d) s += dA.comp(d)[i] * (s1.ctx.zeta[d] * w1[i] + h * gw1.comp(d)[i]);
    f[i] = e[i] * (2.0 * I * s + h * dq[i] * w1[i]) * w2[i];
  }
  return integrate(f);
}

// Mollified drifts and transport phases of one operator, keyed by (tau, zeta0) so that frames
// shared between xi and -xi are computed once. Safe to use from several threads.
class PhaseCache {
 public:
  PhaseCache(OperatorCoefficients co, CGOOptions opt) : co_(std::move(co)), opt_(std::move(opt)) {}

  const OperatorCoefficients& coefficients() const { return co_; }

  std::shared_ptr<const MollifiedDrift> drift(double tau) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      auto it = drifts_.find(tau);
      if (it != drifts_.end()) return it->second;
    }
    auto m = std::make_shared<const MollifiedDrift>(co_.V, tau, opt_.plateau);
    std::lock_guard<std::mutex> lk(mu_);
    return drifts_.emplace(tau, m).first->second;
  }

  std::shared_ptr<const ScalarField> phase(const CVec3& zeta0, double tau) {
    Key key{tau, {zeta0[0].real(), zeta0[0].imag(), zeta0[1].real(), zeta0[1].imag(), zeta0[2].real(), zeta0[2].imag()}};
    {
      std::lock_guard<std::mutex> lk(mu_);
      auto it = phases_.find(key);
      if (it != phases_.end()) return it->second;
    }
    auto m = drift(tau);
    auto p = std::make_shared<const ScalarField>(transport_phase(*m, zeta0, co_.grid(), opt_.cauchy));
    std::lock_guard<std::mutex> lk(mu_);
    return phases_.emplace(key, p).first->second;
  }

  CGOSolution build(const CGOContext& ctx) {
    const double tau = opt_.tau.value_or(std::sqrt(ctx.h));
    auto ph = phase(ctx.zeta0, tau);
    CGOSolution sol = build_cgo_with_phase(co_, ctx, *ph, tau, opt_.remainder);
    sol.diag.transport_residual = transport_residual(*ph, drift(tau)->on(co_.grid()), ctx.zeta0);
    return sol;
  }

 private:
  using Key = std::pair<double, std::array<double, 6>>;
  OperatorCoefficients co_;
  CGOOptions opt_;
  std::mutex mu_;
  std::map<double, std::shared_ptr<const MollifiedDrift>> drifts_;
  std::map<Key, std::shared_ptr<const ScalarField>> phases_;
};

// u1 solves L_{A1,q1} u = 0, u2 solves the transposed equation for (A2, q2); same xi, frame, h.
inline PairingSample pairing_from_cgo(PhaseCache& first, PhaseCache& second, const VectorField& dA,
                                      const ScalarField& dq, const Vec3& xi, const Frame& frame, double h) {
  CGOSolution s1 = first.build(CGOContext::make(xi, frame, h, 1));
  CGOSolution s2 = second.build(CGOContext::make(xi, frame, h, -1));
  PairingSample p{xi, frame, h, 0.0, s1.diag.r_h1scl, s2.diag.r_h1scl};
  p.value = pairing_integral(dA, dq, s1, s2);
  return p;
}

inline PairingSample pairing_from_cgo(const MagneticCoefficients& c1, const MagneticCoefficients& c2, const Vec3& xi,
                                      const Frame& frame, double h, const CGOOptions& opt = {}) {
  PhaseCache first(OperatorCoefficients::magnetic(c1.A, c1.q), opt);
  PhaseCache second(OperatorCoefficients::magnetic_transpose(c2.A, c2.q), opt);
  return pairing_from_cgo(first, second, c2.A - c1.A, c1.q - c2.q, xi, frame, h);
}

// Boundary values of u = e^{x.zeta/h}(a + r) at the given boundary nodes.
inline std::vector<cplx> cgo_boundary_trace(const CGOSolution& s, const std::vector<std::size_t>& nodes) {
  const Grid& g = s.a.grid();
  std::vector<cplx> f;
  f.reserve(nodes.size());
  for (auto idx : nodes) {
    Vec3 x = g.point(idx);
    cplx e = 0.0;
    for (int d = 0; d < 3; ++d) e += x[d] * s.ctx.zeta[d];
    f.push_back(std::exp(e / s.ctx.h) * (s.a[idx] + s.r[idx]));
  }
  return f;
}

// h g^T (Lambda1 - Lambda2) f with f, g the traces of u1 and u2. This is the interior pairing
// evaluated on the discrete solutions that carry these traces, so it agrees with the oracle
// value only while the grid resolves e^{x.mu1/h} (small peclet number |zeta| dx / h).
inline cplx pairing_from_dtn(const DtNMap& first, const DtNMap& second, const CGOSolution& s1, const CGOSolution& s2) {
  if (first.nodes != second.nodes) throw ValidationError("pairing: DtN maps live on different boundaries");
  if (s1.ctx.sign != 1 || s2.ctx.sign != -1) throw ValidationError("pairing: expected a +1 and a -1 solution");
  auto f = cgo_boundary_trace(s1, first.nodes), g = cgo_boundary_trace(s2, first.nodes);
  auto a = first.apply(f), b = second.apply(f);
  cplx v = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) v += g[i] * (a[i] - b[i]);
  return s1.ctx.h * v;
}

// Value at h = 0 of the fit v(h) = v0 + sum_k c_k h^{p_k} (least squares when overdetermined).
inline cplx richardson(const std::vector<double>& hs, const std::vector<cplx>& values,
                       const std::vector<double>& exponents = {1.0, 2.0}) {
  const auto m = static_cast<Eigen::Index>(hs.size());
  const auto n = static_cast<Eigen::Index>(exponents.size() + 1);
  if (hs.size() != values.size() || m < n)
    throw ValidationError("extrapolation needs at least " + std::to_string(n) + " ladder values");
  Eigen::MatrixXd M(m, n);
  Eigen::VectorXcd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    M(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < n; ++k) M(i, k) = std::pow(hs[i], exponents[k - 1]);
    b[i] = values[i];
  }
  Eigen::MatrixXcd Mc = M.cast<cplx>();
  Eigen::VectorXcd x = Mc.colPivHouseholderQr().solve(b);
  return x[0];
}

// Phase sum Phi1 + Phi2 = N^{-1}_theta(i theta . (A2 - A1)) for theta = mu1 + i mu2, unmollified.
inline ScalarField pairing_phase(const VectorField& dA, const Frame& frame, const CauchyOptions& opt = {}) {
  CVec3 theta = detail::null_vector(frame);
  ScalarField f = dot(theta, dA);
  f *= cplx(0, 1);
  return cauchy_transform(f, theta, dA.grid(), opt);
}

// theta . integral of (A2 - A1) e^{i x.xi} e^{Phi1 + Phi2}, the h -> 0 limit of pairing / (2i).
inline cplx phased_transform(const VectorField& dA, const Vec3& xi, const Frame& frame, const CauchyOptions& opt = {}) {
  CVec3 theta = detail::null_vector(frame);
  ScalarField f = dot(theta, dA);
  f *= exp(pairing_phase(dA, frame, opt));
  f *= detail::plane_wave(dA.grid(), xi);
  return integrate(f);
}

// integral of f e^{i x.xi} by the trapezoid rule.
inline cplx fourier_transform(const ScalarField& f, const Vec3& xi) { return integrate(f * detail::plane_wave(f.grid(), xi)); }

inline CVec3 fourier_transform(const VectorField& v, const Vec3& xi) {
  ScalarField e = detail::plane_wave(v.grid(), xi);
  CVec3 out{};
  for (int d = 0; d < 3; ++d) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) s += v.grid().trapezoid_weight(i) * v.comp(d)[i] * e[i];
    out[d] = s;
  }
  return out;
}

// Fourier data of A2 - A1 on the lattice xi = 2 pi k / L of the box, k != 0. A_perp is the
// component perpendicular to xi.
struct FourierSlice {
  DomainSpec box;
  std::vector<std::array<int, 3>> k;
  std::vector<Vec3> xi;
  std::vector<CVec3> A_perp;

  std::size_t size() const { return xi.size(); }
};

inline Vec3 lattice_frequency(const DomainSpec& box, const std::array<int, 3>& k) {
  Vec3 xi{};
  for (int d = 0; d < 3; ++d) xi[d] = 2.0 * std::numbers::pi * k[d] / (box.upper[d] - box.lower[d]);
  return xi;
}

// Nonzero lattice points with |xi_d| <= xi_max on every axis.
inline std::vector<std::array<int, 3>> frequency_lattice(const DomainSpec& box, double xi_max) {
  if (!(xi_max > 0.0)) throw ValidationError("frequency lattice: xi_max must be positive");
  std::array<int, 3> K{};
  for (int d = 0; d < 3; ++d)
    K[d] = static_cast<int>(std::floor(xi_max * (box.upper[d] - box.lower[d]) / (2.0 * std::numbers::pi) + 1e-9));
  std::vector<std::array<int, 3>> out;
  for (int a = -K[0]; a <= K[0]; ++a)
    for (int b = -K[1]; b <= K[1]; ++b)
      for (int c = -K[2]; c <= K[2]; ++c)
        if (a != 0 || b != 0 || c != 0) out.push_back({a, b, c});
  return out;
}

struct ReconstructionOptions {
  std::vector<double> h_ladder{0.4, 0.2, 0.1};
  double max_h_xi = 1.6;  // the ladder is scaled down so that h |xi| stays below this
  std::vector<double> exponents{1.0, 2.0};
  CGOOptions cgo;
  bool phase_correction = true;  // oracle mode: divide out the measured phase factor
  int threads = 1;
  double max_peclet = 0.4;  // DtN data: finest admissible |zeta| dx / h

  void validate() const {
    if (h_ladder.size() < exponents.size() + 1) throw ValidationError("reconstruction: h ladder too short for the extrapolation");
    for (std::size_t i = 0; i < h_ladder.size(); ++i)
      if (!(h_ladder[i] > 0.0) || (i > 0 && !(h_ladder[i] < h_ladder[i - 1])))
        throw ValidationError("reconstruction: h ladder must be positive and strictly decreasing");
    if (!(max_h_xi > 0.0 && max_h_xi < 2.0)) throw ValidationError("reconstruction: max_h_xi must lie in (0, 2)");
    if (threads < 1) throw ValidationError("reconstruction: threads must be >= 1");
    if (!(max_peclet > 0.0)) throw ValidationError("reconstruction: max_peclet must be positive");
  }
};

inline std::vector<double> ladder_for(const Vec3& xi, const ReconstructionOptions& opt) {
  double s = std::min(1.0, opt.max_h_xi / (norm3(xi) * opt.h_ladder.front()));
  std::vector<double> hs;
  for (double h : opt.h_ladder) hs.push_back(h * s);
  return hs;
}

// theta . A_perp = value / (2i) for each frame; least squares in the basis (mu1, mu2) of the
// first frame.
inline CVec3 strip_phases(const std::vector<PairingSample>& limits, const std::vector<cplx>& phase_factors = {}) {
  if (limits.size() < 2) throw ValidationError("phase stripping needs at least two frames");
  if (!phase_factors.empty() && phase_factors.size() != limits.size())
    throw ValidationError("phase stripping: one phase factor per frame expected");
  const Vec3 xi = limits.front().xi;
  const Frame base = limits.front().frame;
  const double xn = norm3(xi);
  if (xn == 0.0) throw ValidationError("phase stripping: xi must be nonzero");
  const auto m = static_cast<Eigen::Index>(limits.size());
  Eigen::MatrixXcd M(m, 2);
  Eigen::VectorXcd b(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& s = limits[static_cast<std::size_t>(j)];
    if (norm3({s.xi[0] - xi[0], s.xi[1] - xi[1], s.xi[2] - xi[2]}) > 1e-12 * (1 + xn))
      throw ValidationError("phase stripping: samples belong to different xi");
    if (std::abs(dot3(s.frame.mu1, xi)) > 1e-10 * xn || std::abs(dot3(s.frame.mu2, xi)) > 1e-10 * xn)
      throw ValidationError("phase stripping: frame not perpendicular to xi");
    CVec3 th = detail::null_vector(s.frame);
    M(j, 0) = dot3(th, to_complex(base.mu1));
    M(j, 1) = dot3(th, to_complex(base.mu2));
    cplx f = phase_factors.empty() ? cplx(1.0) : phase_factors[static_cast<std::size_t>(j)];
    b[j] = s.value * f / cplx(0, 2);
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  auto sv = svd.singularValues();
  if (!(sv[1] > 1e-8 * sv[0])) throw ValidationError("phase stripping: frames do not span the plane perpendicular to xi");
  Eigen::VectorXcd c = svd.solve(b);
  CVec3 out{};
  for (int d = 0; d < 3; ++d) out[d] = c[0] * base.mu1[d] + c[1] * base.mu2[d];
  return out;
}

// Ratio theta . F[A2 - A1](xi) / theta . F[(A2 - A1) e^{Phi1 + Phi2}](xi), computed from the known
// fields. The ratio is 1 in the continuum; it is left at 1 when the transform is negligible.
inline cplx phase_factor(const VectorField& dA, const Vec3& xi, const Frame& frame, const CauchyOptions& opt = {}) {
  CVec3 theta = detail::null_vector(frame);
  ScalarField f = dot(theta, dA);
  double scale = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) scale += f.grid().trapezoid_weight(i) * std::abs(f[i]);
  cplx phased = phased_transform(dA, xi, frame, opt);
  cplx plain = fourier_transform(f, xi);
  if (!(std::abs(phased) > 1e-3 * scale)) return 1.0;
  return plain / phased;
}

struct SliceReport {
  std::vector<std::vector<PairingSample>> ladders;  // per xi: frame-major, then h
  std::vector<PairingSample> limits;                // per xi: one per frame
  std::vector<cplx> phase_factors;                  // per limit
};

// Oracle-mode slice: for every lattice xi, two frames (the default one and its flip), the
// pairing on the scaled h ladder, extrapolation to h = 0 and phase stripping.
// Measured boundary data of the two operators.
struct BoundaryData {
  DtNMap first, second;
};

// With `data`, pairing values come from the DtN maps; CGO solutions and phases still use the
// coefficients.
inline FourierSlice recover_fourier_slice(const MagneticCoefficients& c1, const MagneticCoefficients& c2,
                                          const std::vector<std::array<int, 3>>& lattice,
                                          const ReconstructionOptions& opt = {}, SliceReport* report = nullptr,
                                          const BoundaryData* data = nullptr) {
  opt.validate();
  if (!(c1.grid().spec() == c2.grid().spec())) throw ValidationError("reconstruction: coefficient grids differ");
  const DomainSpec box = c1.grid().spec();
  PhaseCache first(OperatorCoefficients::magnetic(c1.A, c1.q), opt.cgo);
  PhaseCache second(OperatorCoefficients::magnetic_transpose(c2.A, c2.q), opt.cgo);
  const VectorField dA = c2.A - c1.A;
  const ScalarField dq = c1.q - c2.q;

  const std::size_t n = lattice.size();
  FourierSlice slice{box, lattice, std::vector<Vec3>(n), std::vector<CVec3>(n)};
  std::vector<std::vector<PairingSample>> ladders(n);
  std::vector<std::array<PairingSample, 2>> limits(n);
  std::vector<std::array<cplx, 2>> factors(n);

  auto work = [&](std::size_t i) {
    const Vec3 xi = lattice_frequency(box, lattice[i]);
    slice.xi[i] = xi;
    const auto hs = ladder_for(xi, opt);
    const Frame f0 = frame_for(xi);
    const std::array<Frame, 2> frames{f0, f0.flipped()};
    std::vector<PairingSample> lim;
    std::vector<cplx> fac;
    for (int f = 0; f < 2; ++f) {
      std::vector<cplx> vals;
      for (double h : hs) {
        if (!data) {
          ladders[i].push_back(pairing_from_cgo(first, second, dA, dq, xi, frames[f], h));
        } else {
          CGOSolution s1 = first.build(CGOContext::make(xi, frames[f], h, 1));
          CGOSolution s2 = second.build(CGOContext::make(xi, frames[f], h, -1));
          double pe = std::max(s1.diag.peclet, s2.diag.peclet);
          if (pe > opt.max_peclet) {
            std::ostringstream os;
            os << "reconstruction: h=" << h << " gives peclet number " << pe << " above " << opt.max_peclet
               << "; DtN data need a finer grid or a larger h";
            throw ValidationError(os.str());
          }
          ladders[i].push_back({xi, frames[f], h, pairing_from_dtn(data->first, data->second, s1, s2), s1.diag.r_h1scl,
                                s2.diag.r_h1scl});
        }
        vals.push_back(ladders[i].back().value);
      }
      PairingSample l{xi, frames[f], 0.0, richardson(hs, vals, opt.exponents), 0.0, 0.0};
      limits[i][f] = l;
      lim.push_back(l);
      factors[i][f] = opt.phase_correction ? phase_factor(dA, xi, frames[f], opt.cgo.cauchy) : cplx(1.0);
      fac.push_back(factors[i][f]);
    }
    slice.A_perp[i] = strip_phases(lim, fac);
  };

  if (opt.threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(opt.threads, static_cast<int>(n)); ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!err) err = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }
  if (report) {
    report->ladders = ladders;
    report->limits.clear();
    report->phase_factors.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (int f = 0; f < 2; ++f) {
        report->limits.push_back(limits[i][f]);
        report->phase_factors.push_back(factors[i][f]);
      }
  }
  return slice;
}

// Exact slice of a known field, for oracles: the trapezoid Fourier transform projected onto xi-perp.
inline FourierSlice analytic_slice(const VectorField& dA, const std::vector<std::array<int, 3>>& lattice) {
  const DomainSpec box = dA.grid().spec();
  FourierSlice s{box, lattice, {}, {}};
  for (const auto& k : lattice) {
    Vec3 xi = lattice_frequency(box, k);
    CVec3 F = fourier_transform(dA, xi);
    double x2 = dot3(xi, xi);
    cplx p = (F[0] * xi[0] + F[1] * xi[1] + F[2] * xi[2]) / x2;
    s.xi.push_back(xi);
    s.A_perp.push_back({F[0] - p * xi[0], F[1] - p * xi[1], F[2] - p * xi[2]});
  }
  return s;
}

// Largest |A_perp . xi| relative to |A_perp| |xi|.
inline double orthogonality_defect(const FourierSlice& s) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cplx d = s.A_perp[i][0] * s.xi[i][0] + s.A_perp[i][1] * s.xi[i][1] + s.A_perp[i][2] * s.xi[i][2];
    double a = std::sqrt(std::norm(s.A_perp[i][0]) + std::norm(s.A_perp[i][1]) + std::norm(s.A_perp[i][2]));
    if (a > 0.0) m = std::max(m, std::abs(d) / (a * norm3(s.xi[i])));
  }
  return m;
}

// Fourier series synthesis of d(A2 - A1) on `target`:
//   (dA)_{jk}(x) = |box|^{-1} sum_xi -i (xi_j A_k - xi_k A_j)(xi) e^{-i x.xi},
// with F[f](xi) = integral f e^{i x.xi}. For real fields the coefficients are replaced by
// (c(xi) + conj c(-xi)) / 2 and the real part is returned.
inline TwoFormField recover_curl(const FourierSlice& slice, const Grid& target, bool real_field = true,
                                 double hermitian_tol = 1e-2) {
  const std::size_t n = slice.size();
  std::map<std::array<int, 3>, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[slice.k[i]] = i;
  const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  std::vector<std::array<cplx, 3>> coef(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < 3; ++s) {
      int j = pairs[s][0], k = pairs[s][1];
      coef[i][s] = cplx(0, -1) * (slice.xi[i][j] * slice.A_perp[i][k] - slice.xi[i][k] * slice.A_perp[i][j]);
    }
  if (real_field) {
    double asym = 0.0, total = 0.0;
    std::vector<std::array<cplx, 3>> sym(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto it = index.find({-slice.k[i][0], -slice.k[i][1], -slice.k[i][2]});
      if (it == index.end()) throw ValidationError("curl synthesis: xi lattice is not symmetric");
      for (int s = 0; s < 3; ++s) {
        cplx a = coef[i][s], b = std::conj(coef[it->second][s]);
        sym[i][s] = 0.5 * (a + b);
        asym += std::norm(a - b);
        total += std::norm(a) + std::norm(b);
      }
    }
    if (total > 0.0 && std::sqrt(asym / total) > hermitian_tol)
      warn("curl synthesis: coefficients deviate from Hermitian symmetry by " + std::to_string(std::sqrt(asym / total)));
    coef = std::move(sym);
  }
  double vol = 1.0;
  for (int d = 0; d < 3; ++d) vol *= slice.box.upper[d] - slice.box.lower[d];
  TwoFormField out(target);
  for (std::size_t p = 0; p < target.size(); ++p) {
    Vec3 x = target.point(p);
    std::array<cplx, 3> acc{};
    for (std::size_t i = 0; i < n; ++i) {
      cplx e = std::exp(cplx(0, -dot3(x, slice.xi[i])));
      for (int s = 0; s < 3; ++s) acc[s] += coef[i][s] * e;
    }
    for (int s = 0; s < 3; ++s) out.comp(s)[p] = real_field ? cplx(acc[s].real() / vol, 0.0) : acc[s] / vol;
  }
  return out;
}

struct GaugeFit {
  GaugePotential potential;
  double gradient_mismatch = 0.0;  // ||grad phi - diffA|| / ||diffA||
  double curl_ratio = 0.0;         // ||curl diffA|| / ||Jacobian of diffA||
};

// phi with Lap phi = div(diffA) in the interior and phi = 0 on the boundary, so that
// grad phi = diffA when diffA is a boundary-flat gradient.
inline GaugeFit gauge_from_curlfree(const VectorField& diffA, double curl_tol = 0.25, double fit_tol = 5e-2) {
  const Grid& g = diffA.grid();
  GaugeFit out{{ScalarField(g), true}, 0.0, 0.0};
  double jac = jacobian_norm(diffA, 1);
  if (jac == 0.0 && max_abs(diffA) == 0.0) return out;
  out.curl_ratio = l2_norm_interior(curl(diffA), 1) / std::max(jac, 1e-300);
  if (out.curl_ratio > curl_tol)
    throw GaugeObstruction("not gauge-equivalent: relative curl " + std::to_string(out.curl_ratio) + " exceeds " +
                           std::to_string(curl_tol));
  ScalarField src = divergence(diffA);
  src *= -1.0;
  BoundaryFunction zero = BoundaryFunction::sample(g, [](const Vec3&) { return cplx(0.0); });
  ScalarField phi = solve_dirichlet(OperatorCoefficients::laplace(g), zero, &src);
  out.potential = make_gauge_potential(phi);
  out.gradient_mismatch = l2_norm(gradient(phi) - diffA) / std::max(l2_norm(diffA), 1e-300);
  if (out.gradient_mismatch > fit_tol)
    warn("gauge potential: gradient mismatch " + std::to_string(out.gradient_mismatch) + " exceeds " + std::to_string(fit_tol));
  return out;
}

// q2 + 2 A2 . grad phi + (grad phi)^2 - i Lap phi - q1, the defect of the q relation.
inline ScalarField q_identity_defect(const ScalarField& q1, const VectorField& A2, const ScalarField& q2,
                                     const ScalarField& phi) {
  auto gp = gradient(phi);
  auto lp = laplacian(phi);
  ScalarField out(q1.grid());
  const cplx I(0, 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    cplx ag = 0.0, gg = 0.0;
    for (int d = 0; d < 3; ++d) {
      ag += A2.comp(d)[i] * gp.comp(d)[i];
      gg += gp.comp(d)[i] * gp.comp(d)[i];
    }
    out[i] = q2[i] + 2.0 * ag + gg - I * lp[i] - q1[i];
  }
  return out;
}

// Interior L2 norm of the defect over max(1, ||q1||).
inline double q_identity_residual(const ScalarField& q1, const VectorField& A2, const ScalarField& q2,
                                  const ScalarField& phi) {
  return l2_norm_interior(q_identity_defect(q1, A2, q2, phi), 1) / std::max(1.0, l2_norm_interior(q1, 1));
}

struct QPairingSample {
  Vec3 xi{0, 0, 0};
  Frame frame;
  double h = 0.0;
  cplx value = 0.0;
  double remainder_product = 0.0;  // |integral of i grad phi . e^{i x.xi} grad(r1 r2)|
};

// Integral of [(q2~ - q1) u1 u2 + i grad phi . grad(u1 u2)] with q2~ = q2 + 2 A2 . grad phi + (grad phi)^2,
// u1 solving L_{A1,q1} u = 0 (sign +1) and u2 solving
//   -Lap u + 2i A1 . grad u + 2i (div A1) u + div(-i grad phi) u + q2~ u = 0   (sign -1).
// With u1 u2 = e^{i x.xi} w1 w2 the integrand is e^{i x.xi}[(q2~ - q1) w1 w2 + i grad phi . (i xi w1 w2 + grad(w1 w2))].
inline QPairingSample q_pairing_from_cgo(const MagneticCoefficients& c1, const MagneticCoefficients& c2,
                                         const ScalarField& phi, const Vec3& xi, const Frame& frame, double h,
                                         const CGOOptions& opt = {}) {
  const Grid& g = c1.grid();
  const cplx I(0, 1);
  auto gp = gradient(phi);
  ScalarField qt(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    cplx ag = 0.0, gg = 0.0;
    for (int d = 0; d < 3; ++d) {
      ag += c2.A.comp(d)[i] * gp.comp(d)[i];
      gg += gp.comp(d)[i] * gp.comp(d)[i];
    }
    qt[i] = c2.q[i] + 2.0 * ag + gg;
  }
  VectorField V = 2.0 * I * c1.A;
  OperatorCoefficients co2{V, V - I * gp, qt};
  CGOSolution s1 = build_cgo(OperatorCoefficients::magnetic(c1.A, c1.q), CGOContext::make(xi, frame, h, 1), opt);
  CGOSolution s2 = build_cgo(co2, CGOContext::make(xi, frame, h, -1), opt);
  ScalarField w = s1.amplitude() * s2.amplitude();
  ScalarField rr = s1.r * s2.r;
  auto gw = gradient_fourth_order(w);
  auto grr = gradient_fourth_order(rr);
  ScalarField e = detail::plane_wave(g, xi);
  ScalarField f(g), fr(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    cplx t = 0.0, tr = 0.0;
    for (int d = 0; d < 3; ++d) {
      t += gp.comp(d)[i] * (I * xi[d] * w[i] + gw.comp(d)[i]);
      tr += gp.comp(d)[i] * grr.comp(d)[i];
    }
    f[i] = e[i] * ((qt[i] - c1.q[i]) * w[i] + I * t);
    fr[i] = e[i] * I * tr;
  }
  return {xi, frame, h, integrate(f), std::abs(integrate(fr))};
}

}  // namespace cgolab
