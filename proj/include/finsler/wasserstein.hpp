#pragma once

#include <functional>
#include <vector>

#include "finsler/flow.hpp"

namespace finsler {

// Probability density on a 1D grid with a cached quantile table.
//
// Quantiles are taken on the interval [origin, origin + L] with the cut at
// the origin; on periodic grids the JKO machinery works with the circular
// quantile representation internally (no cut).
struct Density1D {
  Grid grid;
  std::vector<double> rho;        // nonnegative, unit mass: sum rho m = 1
  std::vector<double> quantiles;  // Q at levels k/S, k = 0..S (support edges)
  int levels = 128;
};

Density1D make_density(const Grid& g, const WeightField& w, std::vector<double> rho,
                       bool normalize = false, int levels = 128);

// Exact quantile-coupling transport cost between cell-wise densities:
//   w2(mu, nu)^2 = int_0^1 F(Q_nu(s) - Q_mu(s))^2 ds,
// integrated exactly on the merged breakpoints (both quantile functions are
// piecewise linear).  Asymmetric in (mu, nu) for nonreversible norms.
double w2_distance(const Density1D& mu, const Density1D& nu, const Norm& norm1d);

enum class CTransform { c, c_bar };

// Brute-force transforms phi^c(y) = inf_x { d^2(x,y)/2 - phi(x) } and
// psi^cbar(x) = inf_y { d^2(x,y)/2 - psi(y) } over grid points.
ScalarField c_transform(const ScalarField& phi, const FinslerField& field, CTransform dir);

struct CConcavityReport {
  double sup_abs = 0.0;      // sup |phi|
  double sup_grad = 0.0;     // sup F(grad(-phi))
  double max_second = 0.0;   // max second difference along unit-speed stencil rays
  double gap = 0.0;          // max over cells of (phi^c)^cbar - phi  (>= 0)
};

CConcavityReport cconcavity_check(const ScalarField& phi, const FinslerField& field,
                                  const WeightField& w);

// Relative entropy Ent(mu) = sum rho log rho m with 0 log 0 = 0.
double entropy(const Density1D& mu, const WeightField& w);

// Fisher information of the reverse-structure heat flow:
//   I(mu) = sum over faces of F*(D(-rho))^2 / rho * m_f,
// cells below the density floor excluded.
double fisher_information(const Density1D& mu, const FinslerField& field, const WeightField& w);

// One JKO step: minimize Ent(nu) + w2(mu, nu)^2 / (2 delta) over monotone
// quantile displacements (circular, S control points); damped Newton on the
// cyclic-tridiagonal system, the entropy acting as its own barrier.
Density1D jko_step(const Density1D& mu, const Norm& norm1d, const WeightField& w, double delta,
                   int max_newton = 200);

struct JkoEquivalenceReport {
  std::vector<double> deltas;
  std::vector<double> max_l1_error;  // vs the reverse-structure heat flow
  double control_error = 0.0;        // vs the same-structure heat flow (should stay large)
  bool errors_decreasing = true;
};

// Theorem-7 check: the JKO trajectory for Ent under the cost of `norm`
// follows the heat flow of the REVERSE structure.
JkoEquivalenceReport jko_equivalence_check(const Density1D& mu0, NormPtr norm1d,
                                           const WeightField& w, double T,
                                           const std::vector<double>& deltas,
                                           const SolverConfig& heat_cfg);

// Weak continuity-equation residual of a density trajectory against the
// candidate velocity Phi = sign * grad(-rho)/rho, over a basis of smooth
// space-time test functions.  Small residual for sign=+1 along heat flows.
double continuity_residual(const std::vector<Density1D>& traj, const std::vector<double>& times,
                           const FinslerField& field, const WeightField& w, double sign = 1.0);

}  // namespace finsler
