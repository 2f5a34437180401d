#pragma once

#include "finsler/field.hpp"

namespace finsler {

// Staggered face data: comp[d] holds, for every face of direction d, the
// full n-component covector/vector interleaved as comp[d][face*n + c].
// The d-component at a d-face is the one-sided difference across that face;
// the transverse components are 4-point averages of the neighboring
// transverse differences, so a face carries a consistent covector sample at
// its midpoint.
struct FaceData {
  std::array<std::vector<double>, 3> comp;
};
using FaceCovectors = FaceData;
using FaceVectors = FaceData;

// Du with ghost-zero (dirichlet) resp. wrap-around (periodic) extension.
FaceCovectors derivative(const Grid& g, const ScalarField& u);

// Per-face Legendre transfer: (grad u)(f) = J*(x_f, Du(f)).
FaceVectors gradient(const FinslerField& field, const ScalarField& u);

// (1/n) sum_faces m_f <alpha(f), psi(f)>; the discrete duality pairing.
double pairing(const WeightField& w, const FaceCovectors& alpha, const FaceVectors& psi);

// Exact negative adjoint of derivative() under pairing(): for all u, psi,
//   pairing(Du, psi) = -<u, divergence(psi)>_m   to round-off.
ScalarField divergence(const Grid& g, const WeightField& w, const FaceVectors& psi);

struct EnergyReport {
  double energy = 0.0;
};

// Open-domain energy E_Omega(u) = (1/2n) sum over interior faces of
// m_f F*^2(x_f, Du(f)): no boundary condition, constants have zero energy.
EnergyReport energy(const FinslerField& field, const WeightField& w, const ScalarField& u);

// Energy of the zero extension (the Dirichlet functional driving the flow);
// includes the wall faces.  Equals energy() on periodic grids.
double flow_energy(const FinslerField& field, const WeightField& w, const ScalarField& u);

// Finsler Laplacian: the exact L^2(m)-gradient of -flow_energy, in
// conservative flux form; equals divergence(gradient(u)) identically.
ScalarField laplacian(const FinslerField& field, const WeightField& w, const ScalarField& u);

// Zero-extended energy and its exact gradient in one pass (one Legendre
// transfer per face; the energy uses the Euler identity F*^2 = <alpha, J*>).
std::pair<double, ScalarField> flow_energy_laplacian(const FinslerField& field,
                                                     const WeightField& w, const ScalarField& u);

// Linearized operator div(g*(Du) Dw) with coefficients frozen from u;
// faces with Du = 0 fall back to g(x, Z)^{-1} with Z = e_1.  Linear and
// self-adjoint in <.,.>_m; weighted_laplacian(u, u) == laplacian(u).
ScalarField weighted_laplacian(const FinslerField& field, const WeightField& w,
                               const ScalarField& u, const ScalarField& wfun);

// <u, v>_m over cells.
double inner_m(const WeightField& w, const ScalarField& a, const ScalarField& b);

}  // namespace finsler
