#include "finsler/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace finsler {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Model sine s_K(r): r, sin(ar)/a, sinh(ar)/a for K = 0, > 0, < 0.
double model_sine(const ModelParams& p, double r) {
  if (p.N <= 1.0 || p.K == 0.0) return r;
  if (p.K > 0.0) {
    const double a = std::sqrt(p.K / (p.N - 1.0));
    return std::sin(a * r) / a;
  }
  const double a = std::sqrt(-p.K / (p.N - 1.0));
  return std::sinh(a * r) / a;
}

double tridiag_weight(const ModelParams& p, double r) {
  if (p.N <= 1.0) return 1.0;
  return std::pow(model_sine(p, r), p.N - 1.0);
}

double unit_ball_volume(int n) {
  // c_n = pi^{n/2} / Gamma(n/2 + 1)
  return std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

}  // namespace

double ModelParams::L() const {
  if (K > 0.0) return kPi * std::sqrt((N - 1.0) / K);
  return std::numeric_limits<double>::infinity();
}

double model_coefficient(const ModelParams& p, double r) {
  if (!std::isfinite(p.N)) throw std::invalid_argument("model_coefficient: finite N required");
  if (!(r > 0.0) || !(r < p.L())) throw std::invalid_argument("model_coefficient: r outside (0, L)");
  if (p.K == 0.0) return (p.N - 1.0) / r;
  if (p.K > 0.0) {
    const double a = std::sqrt(p.K / (p.N - 1.0));
    return std::sqrt((p.N - 1.0) * p.K) / std::tan(a * r);
  }
  const double a = std::sqrt(-p.K / (p.N - 1.0));
  return std::sqrt(-(p.N - 1.0) * p.K) / std::tanh(a * r);
}

double gaussian_profile(double N, double t, double r) {
  if (!(t > 0.0)) throw std::invalid_argument("gaussian_profile: t must be > 0");
  return std::pow(t, -N / 2.0) * std::exp(-r * r / (4.0 * t));
}

double gaussian_profile_dt(double N, double t, double r) {
  return gaussian_profile(N, t, r) * (-N / (2.0 * t) + r * r / (4.0 * t * t));
}

double exact_gaussian(const Norm& norm, const VecN& y, double t, const VecN& x,
                      GaussianOrientation orient) {
  if (!(t > 0.0)) throw std::invalid_argument("exact_gaussian: t must be > 0");
  const double r = (orient == GaussianOrientation::decreasing) ? norm.value(y - x)
                                                               : norm.value(x - y);
  return gaussian_profile(norm.dim(), t, r);
}

double RadialProfile::value_at(std::size_t time_index, double rr) const {
  const auto& vals = values.at(time_index);
  const double s = rr / dr - 0.5;
  if (s <= 0.0) return vals.front();
  const std::size_t i = static_cast<std::size_t>(s);
  if (i + 1 >= vals.size()) return vals.back();
  const double f = s - i;
  return (1.0 - f) * vals[i] + f * vals[i + 1];
}

RadialProfile solve_radial(const ModelParams& p, const std::function<double(double)>& h0,
                           double R, int cells, double T, const std::vector<double>& record_times,
                           double dt) {
  if (cells < 8) throw std::invalid_argument("solve_radial: need >= 8 cells");
  if (p.K > 0.0 && R > p.L()) throw std::invalid_argument("solve_radial: R exceeds model radius L");
  RadialProfile out;
  out.dr = R / cells;
  out.r.resize(cells);
  for (int i = 0; i < cells; ++i) out.r[i] = (i + 0.5) * out.dr;

  std::vector<double> h(cells);
  for (int i = 0; i < cells; ++i) h[i] = h0(out.r[i]);

  std::vector<double> wc(cells), wf(cells + 1);
  for (int i = 0; i < cells; ++i) wc[i] = tridiag_weight(p, out.r[i]);
  for (int i = 0; i <= cells; ++i) wf[i] = tridiag_weight(p, i * out.dr);
  wf[0] = 0.0;  // no flux through r = 0 (Neumann)

  if (dt <= 0.0) dt = 0.25 * out.dr * out.dr;
  std::vector<double> times = record_times;
  std::sort(times.begin(), times.end());

  auto step = [&](double tau) {
    // implicit: (I - tau A) h^{+} = h, A h = (1/(wc dr^2)) d(wf dh)
    const int m = cells;
    std::vector<double> a(m), b(m), c(m), d(m);
    for (int i = 0; i < m; ++i) {
      const double lo = wf[i] / (wc[i] * out.dr * out.dr);
      const double hi = wf[i + 1] / (wc[i] * out.dr * out.dr);
      a[i] = -tau * lo;
      c[i] = -tau * hi;
      b[i] = 1.0 + tau * (lo + hi);  // absorbing ghost at R: h_m = 0
      d[i] = h[i];
    }
    // Thomas
    for (int i = 1; i < m; ++i) {
      const double f = a[i] / b[i - 1];
      b[i] -= f * c[i - 1];
      d[i] -= f * d[i - 1];
    }
    h[m - 1] = d[m - 1] / b[m - 1];
    for (int i = m - 2; i >= 0; --i) h[i] = (d[i] - c[i] * h[i + 1]) / b[i];
  };

  double t = 0.0;
  auto record = [&](double tt) {
    out.times.push_back(tt);
    out.values.push_back(h);
  };
  for (double target : times) {
    if (target <= t + 1e-15) {
      record(t);
      continue;
    }
    while (t < target - 1e-15) {
      const double tau = std::min(dt, target - t);
      step(tau);
      t += tau;
    }
    record(t);
  }
  (void)T;
  return out;
}

double model_kernel(const ModelParams& p, double t, double r, double R) {
  if (!(t > 0.0)) throw std::invalid_argument("model_kernel: t must be > 0");
  const int n = static_cast<int>(p.N);
  if (p.K == 0.0)
    return std::pow(4.0 * kPi * t, -n / 2.0) * std::exp(-r * r / (4.0 * t));
  // numeric: evolve a small-time K=0 kernel profile, mass-normalized against
  // the model volume element n c_n s_K^{n-1} dr (conserved by the solver)
  if (R <= 0.0) R = std::max(4.0 * r, 12.0 * std::sqrt(t)) + 1.0;
  if (p.K > 0.0) R = std::min(R, 0.999 * p.L());
  const double eps0 = std::min(t / 8.0, 1e-3 * R * R);
  const int cells = 2048;
  auto init = [&](double rr) {
    return std::pow(4.0 * kPi * eps0, -n / 2.0) * std::exp(-rr * rr / (4.0 * eps0));
  };
  RadialProfile prof = solve_radial(p, init, R, cells, t - eps0, {t - eps0});
  // normalize the initial mass defect (truncation of the eps0 bump)
  double mass0 = 0.0;
  const double ncn = n * unit_ball_volume(n);
  for (int i = 0; i < cells; ++i)
    mass0 += init((i + 0.5) * prof.dr) * ncn * tridiag_weight(p, (i + 0.5) * prof.dr) * prof.dr;
  const double v = prof.value_at(0, r);
  return v / mass0;
}

SubsolutionReport subsolution_residual(const FinslerField& field, const WeightField& w,
                                       const DistanceField& dist,
                                       const std::function<double(double, double)>& f,
                                       const std::function<double(double, double)>& f_dt,
                                       const std::vector<double>& times, double tolerance,
                                       const CellMask& exclude) {
  const Grid& g = field.grid();
  SubsolutionReport rep;
  const double hmax = g.hmax();

  // static mask: ball at the pole, boundary ring, cut cells, caller mask
  std::vector<std::uint8_t> skip(g.ncells(), 0);
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const std::size_t c = g.index(i, j, k);
        bool s = dist.d[c] < 3.0 * hmax;
        if (!dist.cut_mask.empty() && dist.cut_mask[c]) s = true;
        if (g.boundary == Boundary::dirichlet_zero) {
          if (i < 3 || i >= g.cells[0] - 3) s = true;
          if (g.n > 1 && (j < 3 || j >= g.cells[1] - 3)) s = true;
          if (g.n > 2 && (k < 3 || k >= g.cells[2] - 3)) s = true;
        }
        if (exclude && exclude(g.cell_center(i, j, k))) s = true;
        skip[c] = s ? 1 : 0;
      }

  ScalarField u(g);
  for (double t : times) {
    for (std::size_t c = 0; c < u.size(); ++c) u[c] = f(t, dist.d[c]);
    rep.peak = std::max(rep.peak, *std::max_element(u.v.begin(), u.v.end()));
    const ScalarField lap = laplacian(field, w, u);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < u.size(); ++c) {
      if (skip[c]) continue;
      double dtu;
      if (f_dt) {
        dtu = f_dt(t, dist.d[c]);
      } else {
        const double dt = 1e-4 * t;
        dtu = (f(t + dt, dist.d[c]) - f(t - dt, dist.d[c])) / (2.0 * dt);
      }
      worst = std::max(worst, dtu - lap[c]);
    }
    rep.times.push_back(t);
    rep.per_time.push_back(worst);
    rep.max_residual = std::max(rep.max_residual, worst);
  }
  rep.certified = rep.max_residual <= tolerance;
  return rep;
}

LaplacianComparisonReport laplacian_comparison_check(const FinslerField& field,
                                                     const WeightField& w,
                                                     const std::array<int, 3>& z,
                                                     const ModelParams& p, double slack_constant,
                                                     const CellMask& exclude) {
  const Grid& g = field.grid();
  const DistanceField dist = distance_field(field, z, DistanceDirection::from_z);
  const ScalarField lap = laplacian(field, w, dist.d);
  const double hmax = g.hmax();

  LaplacianComparisonReport rep;
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const std::size_t c = g.index(i, j, k);
        const double r = dist.d[c];
        if (r < 3.0 * hmax) continue;
        if (!dist.cut_mask.empty() && dist.cut_mask[c]) continue;
        if (g.boundary == Boundary::dirichlet_zero) {
          if (i < 3 || i >= g.cells[0] - 3) continue;
          if (g.n > 1 && (j < 3 || j >= g.cells[1] - 3)) continue;
          if (g.n > 2 && (k < 3 || k >= g.cells[2] - 3)) continue;
        }
        if (exclude && exclude(g.cell_center(i, j, k))) continue;
        const double bound = (p.N - 1.0) / r;  // K = 0 comparison
        const double excess = lap[c] - bound;
        rep.max_excess = std::max(rep.max_excess, excess);
        rep.scaled_excess = std::max(rep.scaled_excess, excess * r * r / hmax);
      }
  rep.certified = rep.scaled_excess <= slack_constant;
  return rep;
}

CheegerYauReport cheeger_yau_check(const FinslerField& field, const WeightField& w,
                                   const std::array<int, 3>& z, const ModelParams& p,
                                   const std::function<double(double)>& h0, double T,
                                   int record_count, const SolverConfig& cfg_in,
                                   double slack_fraction) {
  const Grid& g = field.grid();
  const DistanceField dist = distance_field(field, z, DistanceDirection::to_z);
  ScalarField u0(g);
  double dmax = 0.0;
  for (std::size_t c = 0; c < u0.size(); ++c) {
    u0[c] = h0(dist.d[c]);
    dmax = std::max(dmax, dist.d[c]);
  }

  SolverConfig cfg = cfg_in;
  if (!(cfg.delta > 0.0)) cfg.delta = default_delta(field, w);
  const int nsteps = std::max(1, static_cast<int>(std::llround(T / cfg.delta)));
  cfg.delta = T / nsteps;
  cfg.record_every = std::max(1, nsteps / std::max(1, record_count));

  FlowTrajectory traj = evolve(field, w, u0, T, cfg);

  const double R = dmax * 1.05;
  const int rcells = std::max(256, 4 * g.cells[0]);
  RadialProfile model = solve_radial(p, h0, R, rcells, T, traj.times,
                                     std::min(0.25 * (R / rcells) * (R / rcells), cfg.delta / 4));

  CheegerYauReport rep;
  for (std::size_t c = 0; c < u0.size(); ++c) rep.peak = std::max(rep.peak, u0[c]);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    double slack = 0.0;
    for (std::size_t c = 0; c < u0.size(); ++c) {
      if (!dist.cut_mask.empty() && dist.cut_mask[c]) continue;
      const double model_v = model.value_at(k, dist.d[c]);
      slack = std::max(slack, model_v - traj.states[k][c]);
    }
    rep.times.push_back(traj.times[k]);
    rep.slack.push_back(slack);
    rep.max_slack = std::max(rep.max_slack, slack);
  }
  rep.certified = rep.max_slack <= slack_fraction * rep.peak;
  return rep;
}

KernelBoundReport kernel_lower_bound_check(const FinslerField& field, const WeightField& w,
                                           const std::array<int, 3>& z, const ModelParams& p,
                                           const std::vector<double>& times,
                                           const std::vector<double>& eps_list,
                                           const SolverConfig& cfg_in, double tolerance) {
  const Grid& g = field.grid();
  if (g.boundary != Boundary::periodic)
    throw std::invalid_argument("kernel_lower_bound_check: compact (periodic) field required");
  const double hmax = g.hmax();
  for (double e : eps_list)
    if (std::sqrt(2.0 * e) < 2.5 * hmax)
      throw std::invalid_argument("kernel_lower_bound_check: eps below grid resolution");

  const DistanceField dist = distance_field(field, z, DistanceDirection::to_z);
  std::vector<double> eps = eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<double>());

  KernelBoundReport rep;
  rep.eps = eps;
  SolverConfig cfg = cfg_in;
  if (!(cfg.delta > 0.0)) cfg.delta = default_delta(field, w);

  // evolved approximations per eps, sampled at the requested times
  std::vector<std::vector<ScalarField>> approx(eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    ScalarField ue(g);
    for (std::size_t c = 0; c < ue.size(); ++c)
      ue[c] = model_kernel(p, eps[e], dist.d[c]);
    for (double t : times) {
      const double horizon = t - eps[e];
      if (horizon <= 0) throw std::invalid_argument("kernel check: eps >= requested time");
      FlowTrajectory traj = evolve(field, w, ue, horizon, cfg);
      approx[e].push_back(traj.states.back());
      const double m = mass(traj.states.back(), w);
      rep.mass_error = std::max(rep.mass_error, std::abs(m - 1.0));
    }
  }

  // monotone in decreasing eps: later (smaller eps) approximations dominate
  for (std::size_t e = 0; e + 1 < eps.size(); ++e)
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      for (std::size_t c = 0; c < g.ncells(); ++c) {
        const double inc = approx[e][ti][c] - approx[e + 1][ti][c];
        rep.monotone_violation = std::max(rep.monotone_violation, inc);
      }

  // bound (iii): p_t(x,z) >= p_t^{K,n}(d(x,z)), using the smallest eps
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double peak = model_kernel(p, times[ti], 0.0);
    for (std::size_t c = 0; c < g.ncells(); ++c) {
      const double model_v = model_kernel(p, times[ti], dist.d[c]);
      const double defect = (model_v - approx.back()[ti][c]) / peak;
      rep.bound_violation = std::max(rep.bound_violation, defect);
    }
  }
  rep.certified = rep.monotone_violation <= tolerance && rep.bound_violation <= tolerance &&
                  rep.mass_error <= 1e-6;
  return rep;
}

}  // namespace finsler
