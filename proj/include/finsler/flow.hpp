#pragma once

#include <optional>
#include <vector>

#include "finsler/operators.hpp"

namespace finsler {

struct solver_error : std::runtime_error {
  double residual = 0.0;
  int iterations = 0;
  solver_error(const std::string& what, double res, int it)
      : std::runtime_error(what), residual(res), iterations(it) {}
};

enum class Scheme { minimizing_movement, semi_implicit };

struct SolverConfig {
  double delta = 0.0;  // time step; 0 selects h^2/4 scaled by the field constants
  Scheme scheme = Scheme::minimizing_movement;
  double inner_tol = 1e-10;
  int inner_max_iter = 500;
  double norm_regularization_eps = 0.0;  // inner Hessian only, never reported quantities
  int record_every = 1;
};

double default_delta(const FinslerField& field, const WeightField& w);

struct StepResult {
  ScalarField u;
  int iterations = 0;
  double residual = 0.0;
};

// One implicit-Euler step: the minimizer of E0(u) + |u - u0|^2_m / (2 delta).
// Inner solver: L-BFGS on the convex objective with Barzilai-Borwein
// fallback; optimality residual |u - u0 - delta Lap(u)|_{L^2(m)} <= inner_tol.
StepResult mm_step(const FinslerField& field, const WeightField& w, const ScalarField& u0,
                   const SolverConfig& cfg);

// Frozen-coefficient linearization: solve (I - delta Lap^(u0)) u = u0 by CG
// in the m-inner product.
StepResult semi_implicit_step(const FinslerField& field, const WeightField& w,
                              const ScalarField& u0, const SolverConfig& cfg);

struct StepDiagnostics {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;  // zero-extended energy (the flow Lyapunov functional)
  double l2 = 0.0;
  double lap_l2 = 0.0;
  int inner_iterations = 0;
};

struct FlowTrajectory {
  std::vector<double> times;          // recorded times, starting at 0
  std::vector<ScalarField> states;    // recorded states, starting at u0
  std::vector<StepDiagnostics> diag;  // one row per recorded time
  double delta = 0.0;                 // actual step used
};

FlowTrajectory evolve(const FinslerField& field, const WeightField& w, const ScalarField& u0,
                      double T, const SolverConfig& cfg);

// Ground-state energy chi (Dirichlet) or chi-bar (mean-zero): proximal
// power iteration, renormalized (and mean-projected) every step.
enum class SpectralMode { dirichlet_chi, mean_zero_chi_bar };

struct SpectralReport {
  double chi = 0.0;
  ScalarField minimizer;
  std::vector<double> history;  // Rayleigh quotient per iteration
  int iterations = 0;
};

SpectralReport ground_state(const FinslerField& field, const WeightField& w, SpectralMode mode,
                            double tol, std::uint64_t seed = 1, int max_iterations = 4000);

// L^p contraction certificate for two recorded trajectories:
//   |u_t - v_t|_p <= exp(-4(p-1)/p^2 kappa chi t) |u0 - v0|_p.
struct ContractionReport {
  double p = 2.0;
  double rate = 0.0;
  double max_ratio = 0.0;
  bool coincident = false;  // identical initial data; ratios reported as 0
  std::vector<double> times;
  std::vector<double> ratios;
};

ContractionReport contraction_report(const FlowTrajectory& u, const FlowTrajectory& v,
                                     const WeightField& w, double p, double kappa, double chi);

// Integrated Gaussian bound: int u0 P_t v0 dm <= exp(-d^2(v,u)/4t) |u0| |v0|.
// d(v,u) is the infimum of d(y,x) over y in supp v0, x in supp u0.
struct DaviesReport {
  double distance = 0.0;
  bool trivial_bound = false;  // overlapping supports
  std::vector<double> times;
  std::vector<double> ratios;
  double max_ratio = 0.0;
};

DaviesReport davies_check(const FinslerField& field, const WeightField& w, const ScalarField& u0,
                          const ScalarField& v0, const std::vector<double>& times,
                          const SolverConfig& cfg);

}  // namespace finsler
