#pragma once

#include <optional>

#include "ops.hpp"

namespace cgolab {

// Real-valued fluid parameters sampled on a grid (imaginary parts are ignored).
struct FluidParameters {
  ScalarField c;       // sound speed
  VectorField v;       // background flow
  ScalarField rho;     // density
  ScalarField alpha0;  // absorption amplitude
  ScalarField zeta;    // absorption frequency exponent

  const Grid& grid() const { return c.grid(); }

  void validate() const {
    const auto& g = c.grid().spec();
    if (!(v.grid().spec() == g && rho.grid().spec() == g && alpha0.grid().spec() == g && zeta.grid().spec() == g))
      throw ValidationError("fluid parameters: fields live on different grids");
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!(c[i].real() > 0.0) || !std::isfinite(c[i].real())) throw ValidationError("fluid parameters: sound speed must be positive");
      if (!(rho[i].real() > 0.0) || !std::isfinite(rho[i].real())) throw ValidationError("fluid parameters: density must be positive");
    }
    if (!all_finite(v) || !all_finite(alpha0) || !all_finite(zeta)) throw ValidationError("fluid parameters: non-finite samples");
  }
};

// Coefficients (A, q) of the magnetic Schrodinger operator at one frequency.
struct FrequencyPerturbation {
  double omega = 1.0;
  VectorField A;
  ScalarField q;
};

struct GaugePotential {
  ScalarField phi;
  bool boundary_flat = false;
};

// A = omega v / c^2 + (i/2) grad(rho) / rho,  q = -omega^2 / c^2 - 2 i omega^(1+zeta) alpha0 / c.
// grad(rho) is taken by finite differences unless supplied.
inline FrequencyPerturbation coefficients_from_fluid(const FluidParameters& p, double omega,
                                                     const std::optional<VectorField>& grad_rho = std::nullopt) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ValidationError("frequency must be positive");
  p.validate();
  const Grid& g = p.grid();
  VectorField gr = grad_rho ? *grad_rho : gradient(real_part(p.rho));
  FrequencyPerturbation out{omega, VectorField(g), ScalarField(g)};
  const cplx I(0, 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double c = p.c[i].real();
    double rho = p.rho[i].real();
    for (int d = 0; d < 3; ++d)
      out.A.comp(d)[i] = omega * p.v.comp(d)[i].real() / (c * c) + 0.5 * I * gr.comp(d)[i] / rho;
    double wz = std::exp(p.zeta[i].real() * std::log(omega));
    out.q[i] = -omega * omega / (c * c) - 2.0 * I * omega * wz * p.alpha0[i].real() / c;
  }
  return out;
}

// L_{A,q} u = -Lap u - 2i A . grad u + q u, with grid operators.
inline ScalarField apply_magnetic_operator(const VectorField& A, const ScalarField& q, const ScalarField& u) {
  ScalarField out = laplacian(u);
  out *= -1.0;
  auto gu = gradient(u);
  const cplx I(0, 1);
  for (std::size_t i = 0; i < u.size(); ++i) {
    cplx s = A.comp(0)[i] * gu.comp(0)[i] + A.comp(1)[i] * gu.comp(1)[i] + A.comp(2)[i] * gu.comp(2)[i];
    out[i] += -2.0 * I * s + q[i] * u[i];
  }
  return out;
}

// (A, q) -> (A + grad phi, q + 2 A.grad phi + (grad phi)^2 - i Lap phi).
inline std::pair<VectorField, ScalarField> apply_gauge(const VectorField& A, const ScalarField& q, const ScalarField& phi) {
  A.check(VectorField(phi.grid()));
  auto gp = gradient(phi);
  auto lp = laplacian(phi);
  VectorField A2 = A + gp;
  ScalarField q2(q.grid());
  const cplx I(0, 1);
  for (std::size_t i = 0; i < q.size(); ++i) {
    cplx agp = 0.0, gp2 = 0.0;
    for (int d = 0; d < 3; ++d) {
      agp += A.comp(d)[i] * gp.comp(d)[i];
      gp2 += gp.comp(d)[i] * gp.comp(d)[i];
    }
    q2[i] = q[i] + 2.0 * agp + gp2 - I * lp[i];
  }
  return {std::move(A2), std::move(q2)};
}

inline FrequencyPerturbation apply_gauge(const FrequencyPerturbation& p, const ScalarField& phi) {
  auto [A, q] = apply_gauge(p.A, p.q, phi);
  return {p.omega, std::move(A), std::move(q)};
}

// Interior L2 norm of e^{-i phi} L_{A2,q2}(e^{i phi} u) - L_{A1,q1} u, where
// (A1, q1) = apply_gauge(A2, q2, phi).
inline double conjugation_residual(const VectorField& A1, const ScalarField& q1, const VectorField& A2,
                                   const ScalarField& q2, const ScalarField& phi, const ScalarField& u) {
  const cplx I(0, 1);
  ScalarField e = phi.map([&](cplx z) { return std::exp(I * z); });
  ScalarField lhs = apply_magnetic_operator(A2, q2, e * u);
  ScalarField einv = phi.map([&](cplx z) { return std::exp(-I * z); });
  lhs *= einv;
  lhs -= apply_magnetic_operator(A1, q1, u);
  return l2_norm_interior(lhs, 1);
}

// Largest |phi| and |grad phi| over boundary nodes.
inline double boundary_flatness(const ScalarField& phi) {
  const Grid& g = phi.grid();
  auto gp = gradient(phi);
  double m = 0.0;
  for (auto idx : g.boundary_nodes()) {
    m = std::max(m, std::abs(phi[idx]));
    for (int d = 0; d < 3; ++d) m = std::max(m, std::abs(gp.comp(d)[idx]));
  }
  return m;
}

// Flat when boundary values and one-sided boundary derivatives are below tol relative to
// the largest interior gradient.
inline GaugePotential make_gauge_potential(const ScalarField& phi, double tol = 1e-2) {
  return {phi, boundary_flatness(phi) <= tol * std::max(1e-300, max_abs(gradient(phi)))};
}

}  // namespace cgolab
