#pragma once

#include <functional>
#include <vector>

#include "finsler/flow.hpp"

namespace finsler {

// Curvature-dimension model parameters.  L is the model-space radius,
// pi sqrt((N-1)/K) for K > 0 and infinite otherwise.
struct ModelParams {
  double K = 0.0;
  double N = 1.0;  // finite N >= 1; the N = infinity reading appears only in
                   // the Lichnerowicz bound and needs no model coefficient
  double L() const;
};

// Drift coefficient of the radial model PDE dh/dt = h'' + c(r) h':
//   sqrt((N-1)K) cot(sqrt(K/(N-1)) r)     for K > 0,
//   (N-1)/r                               for K = 0,
//   sqrt(-(N-1)K) coth(sqrt(-K/(N-1)) r)  for K < 0.
double model_coefficient(const ModelParams& p, double r);

// Radial Gaussian profile t^{-N/2} exp(-r^2/4t) and its time derivative.
double gaussian_profile(double N, double t, double r);
double gaussian_profile_dt(double N, double t, double r);

// Exact local solution u(t,x) = t^{-n/2} exp(-||y-x||^2 / 4t).  The radially
// decreasing profile takes the argument ||y-x||; mirrored evaluates ||x-y||
// (a solution only for reversible norms).
enum class GaussianOrientation { decreasing, mirrored };
double exact_gaussian(const Norm& norm, const VecN& y, double t, const VecN& x,
                      GaussianOrientation orient = GaussianOrientation::decreasing);

// Radial model solver: conservative implicit finite differences for
//   dh/dt = (1/w) d/dr ( w dh/dr ),  w(r) = s_K(r)^{N-1},
// Neumann at r = 0, absorbing at r = R.
struct RadialProfile {
  std::vector<double> r;       // cell centers (i + 1/2) dr
  double dr = 0.0;
  std::vector<double> times;   // recorded times (monotone, starts at 0)
  std::vector<std::vector<double>> values;
  double value_at(std::size_t time_index, double rr) const;  // linear interp, clamped
};

RadialProfile solve_radial(const ModelParams& p, const std::function<double(double)>& h0,
                           double R, int cells, double T, const std::vector<double>& record_times,
                           double dt = 0.0);

// Model heat kernel p_t^{K,n}(r), normalized against the model volume
// element n c_n s_K(r)^{n-1} dr; K = 0 is the classical closed form.
double model_kernel(const ModelParams& p, double t, double r, double R = 0.0);

// Certificates ------------------------------------------------------------
//
// All checks report a one-sided slack and exclusion masks used; they skip a
// ball around z, a boundary ring, cut-locus cells on tori, and (optionally)
// cells near the norm's Hessian degeneracy set, where pointwise Laplacians
// of radial functions are information-limited at lattice resolution.

using CellMask = std::function<bool(const VecN&)>;  // true = exclude

struct SubsolutionReport {
  double max_residual = -std::numeric_limits<double>::infinity();  // max of dt u - Lap u
  double peak = 0.0;
  std::vector<double> times;
  std::vector<double> per_time;
  bool certified = false;
};

// Residual of dt u <= Lap u for radial candidates u(t,x) = f(t, d(x)) given
// a precomputed distance field.  f_dt may be empty (centered differences).
SubsolutionReport subsolution_residual(const FinslerField& field, const WeightField& w,
                                       const DistanceField& dist,
                                       const std::function<double(double, double)>& f,
                                       const std::function<double(double, double)>& f_dt,
                                       const std::vector<double>& times, double tolerance,
                                       const CellMask& exclude = nullptr);

struct LaplacianComparisonReport {
  double max_excess = 0.0;       // max of Lap d - (N-1)/d over unmasked cells
  double scaled_excess = 0.0;    // max of (Lap d - (N-1)/d) r^2 / h
  bool certified = false;
};

LaplacianComparisonReport laplacian_comparison_check(const FinslerField& field,
                                                     const WeightField& w,
                                                     const std::array<int, 3>& z,
                                                     const ModelParams& p, double slack_constant,
                                                     const CellMask& exclude = nullptr);

struct CheegerYauReport {
  std::vector<double> times;
  std::vector<double> slack;  // max over cells of (model - solution)_+
  double peak = 0.0;          // max of h0
  double max_slack = 0.0;
  bool certified = false;
};

CheegerYauReport cheeger_yau_check(const FinslerField& field, const WeightField& w,
                                   const std::array<int, 3>& z, const ModelParams& p,
                                   const std::function<double(double)>& h0, double T,
                                   int record_count, const SolverConfig& cfg,
                                   double slack_fraction);

struct KernelBoundReport {
  std::vector<double> eps;
  double monotone_violation = 0.0;  // max over cells/times of increase along eps decreasing
  double bound_violation = 0.0;     // max of (model - approx kernel)_+ relative to model peak
  double mass_error = 0.0;
  bool certified = false;
};

KernelBoundReport kernel_lower_bound_check(const FinslerField& field, const WeightField& w,
                                           const std::array<int, 3>& z, const ModelParams& p,
                                           const std::vector<double>& times,
                                           const std::vector<double>& eps_list,
                                           const SolverConfig& cfg, double tolerance);

}  // namespace finsler
