#include "finsler/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

namespace finsler {

namespace {

double weighted_norm(const WeightField& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i] * w.cell_m[i];
  return std::sqrt(s);
}

double weighted_dot(const WeightField& w, const std::vector<double>& a,
                    const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * w.cell_m[i];
  return s;
}

// Coefficient field for inner linearizations; optionally eps-regularized
// (full mode) so the frozen Hessians stay uniformly elliptic.
FinslerField coefficient_field(const FinslerField& field, double eps) {
  if (eps <= 0.0) return field;
  if (field.uniform())
    return FinslerField(field.grid(), regularize(field.uniform_norm(), eps, RegMode::full));
  return field;  // varying fields keep their own norms; eps applies per face below
}

}  // namespace

double default_delta(const FinslerField& field, const WeightField& w) {
  (void)w;
  const Grid& g = field.grid();
  double h2 = g.hmax() * g.hmax();
  const auto cc = field.field_constants(256, 7);
  const double ls = cc.lambda_star_degenerate ? 0.05 : std::max(cc.lambda_star, 0.05);
  return std::min(h2 / (4.0 * ls), 25.0 * h2);
}

StepResult mm_step(const FinslerField& field, const WeightField& w, const ScalarField& u0,
                   const SolverConfig& cfg) {
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("mm_step: delta must be > 0");
  const double delta = cfg.delta;
  const std::size_t nc = u0.size();

  ScalarField u = u0;
  auto objective_grad = [&](const ScalarField& x, std::vector<double>* grad) {
    auto [e, lap] = flow_energy_laplacian(field, w, x);
    double obj = e;
    for (std::size_t i = 0; i < nc; ++i) {
      const double d = x[i] - u0[i];
      obj += 0.5 * d * d * w.cell_m[i] / delta;
      if (grad) (*grad)[i] = -lap[i] + d / delta;  // m-weighted gradient
    }
    return obj;
  };

  std::vector<double> g(nc), g_new(nc);
  double obj = objective_grad(u, &g);
  double res = delta * weighted_norm(w, g);  // |u - u0 - delta Lap u|_{L2(m)}

  // L-BFGS memory in the m-inner product
  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  const int mem = 8;
  std::vector<double> dir(nc), x_new(nc);
  double step0 = delta;  // natural scale: one explicit heat step

  int it = 0;
  for (; it < cfg.inner_max_iter && res > cfg.inner_tol; ++it) {
    // two-loop recursion
    dir = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * weighted_dot(w, S[i], dir);
      for (std::size_t c = 0; c < nc; ++c) dir[c] -= alpha[i] * Y[i][c];
    }
    double scale = step0;
    if (!S.empty()) {
      const double yy = weighted_dot(w, Y.back(), Y.back());
      const double sy = 1.0 / rho.back();
      if (yy > 0) scale = sy / yy;
    }
    for (std::size_t c = 0; c < nc; ++c) dir[c] *= scale;
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * weighted_dot(w, Y[i], dir);
      for (std::size_t c = 0; c < nc; ++c) dir[c] += (alpha[i] - beta) * S[i][c];
    }
    // dir approximates H^{-1} g; descend along -dir with Armijo backtracking
    const double gd = weighted_dot(w, g, dir);
    double tau = 1.0;
    ScalarField xt = u;
    double obj_new = 0.0;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t c = 0; c < nc; ++c) xt.v[c] = u.v[c] - tau * dir[c];
      obj_new = objective_grad(xt, nullptr);
      if (std::isfinite(obj_new) && obj_new <= obj - 1e-4 * tau * gd) {
        ok = true;
        break;
      }
      tau *= 0.5;
    }
    if (!ok || gd <= 0) {
      // curvature pairs degenerate: restart from a plain BB/gradient step
      S.clear();
      Y.clear();
      rho.clear();
      double bb = step0;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t c = 0; c < nc; ++c) xt.v[c] = u.v[c] - bb * g[c];
        obj_new = objective_grad(xt, nullptr);
        if (std::isfinite(obj_new) && obj_new < obj) break;
        bb *= 0.5;
      }
      if (!(obj_new < obj)) break;  // no descent available at machine scale
    }
    objective_grad(xt, &g_new);
    std::vector<double> s(nc), y(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      s[c] = xt.v[c] - u.v[c];
      y[c] = g_new[c] - g[c];
    }
    const double sy = weighted_dot(w, s, y);
    if (sy > 1e-300) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > mem) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    u = xt;
    obj = obj_new;
    g = g_new;
    res = delta * weighted_norm(w, g);
  }
  if (res > cfg.inner_tol)
    throw solver_error("mm_step: inner solver did not converge", res, it);
  return {std::move(u), it, res};
}

StepResult semi_implicit_step(const FinslerField& field, const WeightField& w,
                              const ScalarField& u0, const SolverConfig& cfg) {
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("semi_implicit_step: delta must be > 0");
  const FinslerField coeff = coefficient_field(field, cfg.norm_regularization_eps);
  const double delta = cfg.delta;
  const std::size_t nc = u0.size();

  auto apply = [&](const ScalarField& x) {
    ScalarField ax = weighted_laplacian(coeff, w, u0, x);
    ScalarField r = x;
    for (std::size_t i = 0; i < nc; ++i) r[i] = x[i] - delta * ax[i];
    return r;
  };

  // CG in <.,.>_m on the SPD operator I - delta Lap^(u0)
  ScalarField x = u0;
  ScalarField r(x.grid), pdir(x.grid);
  {
    ScalarField ax = apply(x);
    for (std::size_t i = 0; i < nc; ++i) r[i] = u0[i] - ax[i];
  }
  pdir = r;
  double rr = inner_m(w, r, r);
  const double b_norm = std::sqrt(inner_m(w, u0, u0));
  const double tol = cfg.inner_tol * std::max(1.0, b_norm);
  int it = 0;
  for (; it < cfg.inner_max_iter && std::sqrt(rr) > tol; ++it) {
    ScalarField ap = apply(pdir);
    const double pap = inner_m(w, pdir, ap);
    if (!(pap > 0)) break;
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < nc; ++i) {
      x[i] += alpha * pdir[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_new = inner_m(w, r, r);
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < nc; ++i) pdir[i] = r[i] + beta * pdir[i];
    rr = rr_new;
  }
  if (std::sqrt(rr) > tol)
    throw solver_error("semi_implicit_step: CG did not converge", std::sqrt(rr), it);
  return {std::move(x), it, std::sqrt(rr)};
}

FlowTrajectory evolve(const FinslerField& field, const WeightField& w, const ScalarField& u0,
                      double T, const SolverConfig& cfg_in) {
  if (!(T > 0.0)) throw std::invalid_argument("evolve: T must be > 0");
  SolverConfig cfg = cfg_in;
  if (!(cfg.delta > 0.0)) cfg.delta = default_delta(field, w);
  const int nsteps = std::max(1, static_cast<int>(std::llround(T / cfg.delta)));
  cfg.delta = T / nsteps;

  FlowTrajectory traj;
  traj.delta = cfg.delta;
  auto record = [&](double t, const ScalarField& u, int iters) {
    StepDiagnostics d;
    d.t = t;
    d.mass = mass(u, w);
    auto [e, lap] = flow_energy_laplacian(field, w, u);
    d.energy = e;
    d.l2 = lp_norm(u, w, 2.0);
    d.lap_l2 = lp_norm(lap, w, 2.0);
    d.inner_iterations = iters;
    traj.times.push_back(t);
    traj.states.push_back(u);
    traj.diag.push_back(d);
  };

  record(0.0, u0, 0);
  ScalarField u = u0;
  const int every = std::max(1, cfg.record_every);
  for (int s = 1; s <= nsteps; ++s) {
    StepResult r = (cfg.scheme == Scheme::minimizing_movement)
                       ? mm_step(field, w, u, cfg)
                       : semi_implicit_step(field, w, u, cfg);
    u = std::move(r.u);
    if (s % every == 0 || s == nsteps) record(s * cfg.delta, u, r.iterations);
  }
  return traj;
}

SpectralReport ground_state(const FinslerField& field, const WeightField& w, SpectralMode mode,
                            double tol, std::uint64_t seed, int max_iterations) {
  const Grid& g = field.grid();
  if (mode == SpectralMode::mean_zero_chi_bar && g.boundary == Boundary::dirichlet_zero) {
    // allowed with an explicit (nonuniform) weight; the projection below works either way
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ScalarField u(g);
  for (auto& x : u.v) x = uni(rng);

  auto project = [&](ScalarField& x) {
    if (mode == SpectralMode::mean_zero_chi_bar) {
      const double mean = mass(x, w) / w.total_mass;
      for (auto& v : x.v) v -= mean;
    }
    const double nn = std::sqrt(inner_m(w, x, x));
    if (nn > 0)
      for (auto& v : x.v) v /= nn;
  };
  project(u);

  SpectralReport rep;
  double R = 2.0 * flow_energy(field, w, u);
  rep.history.push_back(R);
  SolverConfig cfg;
  cfg.scheme = Scheme::semi_implicit;
  cfg.inner_tol = 1e-12;
  cfg.inner_max_iter = 4000;
  int it = 0;
  for (; it < max_iterations; ++it) {
    cfg.delta = 0.5 / std::max(R, 1e-12);
    StepResult r = semi_implicit_step(field, w, u, cfg);
    u = std::move(r.u);
    project(u);
    const double R_new = 2.0 * flow_energy(field, w, u);
    rep.history.push_back(R_new);
    const bool settled = std::abs(R_new - R) <= tol * std::max(std::abs(R_new), 1e-300);
    R = R_new;
    if (settled && it > 4) break;
  }
  if (it >= max_iterations)
    throw solver_error("ground_state: Rayleigh quotient did not settle", R, it);
  rep.chi = R;
  rep.minimizer = std::move(u);
  rep.iterations = it + 1;
  return rep;
}

ContractionReport contraction_report(const FlowTrajectory& u, const FlowTrajectory& v,
                                     const WeightField& w, double p, double kappa, double chi) {
  if (u.times.size() != v.times.size()) throw std::invalid_argument("contraction: mismatched trajectories");
  ContractionReport rep;
  rep.p = p;
  rep.rate = std::isinf(p) ? 0.0 : 4.0 * (p - 1.0) / (p * p) * kappa * chi;
  const Grid& g = w.grid;
  ScalarField diff(g);
  auto dnorm = [&](std::size_t k) {
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = u.states[k][i] - v.states[k][i];
    return lp_norm(diff, w, p);
  };
  const double d0 = dnorm(0);
  if (d0 == 0.0) {
    rep.coincident = true;
    for (std::size_t k = 0; k < u.times.size(); ++k) {
      if (std::abs(u.times[k] - v.times[k]) > 1e-12)
        throw std::invalid_argument("contraction: mismatched times");
      rep.times.push_back(u.times[k]);
      rep.ratios.push_back(0.0);
    }
    return rep;
  }
  for (std::size_t k = 0; k < u.times.size(); ++k) {
    if (std::abs(u.times[k] - v.times[k]) > 1e-12)
      throw std::invalid_argument("contraction: mismatched times");
    const double t = u.times[k];
    const double ratio = dnorm(k) / (std::exp(-rep.rate * t) * d0);
    rep.times.push_back(t);
    rep.ratios.push_back(ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  return rep;
}

DaviesReport davies_check(const FinslerField& field, const WeightField& w, const ScalarField& u0,
                          const ScalarField& v0, const std::vector<double>& times,
                          const SolverConfig& cfg) {
  if (times.empty()) throw std::invalid_argument("davies_check: need at least one time");
  const Grid& g = field.grid();
  DaviesReport rep;

  // d(v, u) = inf d(y, x) over y in supp v0, x in supp u0
  std::vector<std::size_t> su, sv;
  for (std::size_t i = 0; i < u0.size(); ++i) {
    if (u0[i] != 0.0) su.push_back(i);
    if (v0[i] != 0.0) sv.push_back(i);
  }
  if (su.empty() || sv.empty()) throw std::invalid_argument("davies_check: empty support");
  double dmin = std::numeric_limits<double>::infinity();
  const bool periodic = g.boundary == Boundary::periodic;
  const int K = periodic ? 1 : 0;
  for (std::size_t yi : sv) {
    int ya, yb, yc;
    g.coords(yi, &ya, &yb, &yc);
    const VecN y = g.cell_center(ya, yb, yc);
    const auto norm = field.norm_at(y);
    for (std::size_t xi : su) {
      if (xi == yi) {
        dmin = 0.0;
        break;
      }
      int xa, xb, xc;
      g.coords(xi, &xa, &xb, &xc);
      const VecN x = g.cell_center(xa, xb, xc);
      for (int tk = -(g.n > 2 ? K : 0); tk <= (g.n > 2 ? K : 0); ++tk)
        for (int tj = -(g.n > 1 ? K : 0); tj <= (g.n > 1 ? K : 0); ++tj)
          for (int ti = -K; ti <= K; ++ti) {
            VecN xt = x;
            xt[0] += ti * g.length(0);
            if (g.n > 1) xt[1] += tj * g.length(1);
            if (g.n > 2) xt[2] += tk * g.length(2);
            dmin = std::min(dmin, norm->value(xt - y));
          }
    }
  }
  rep.distance = dmin;
  rep.trivial_bound = (dmin <= 0.0);

  const double nu = lp_norm(u0, w, 2.0);
  const double nv = lp_norm(v0, w, 2.0);
  const double tmax = *std::max_element(times.begin(), times.end());

  FlowTrajectory traj = evolve(field, w, v0, tmax, cfg);
  for (double t : times) {
    // nearest recorded state
    std::size_t best = 0;
    for (std::size_t k = 1; k < traj.times.size(); ++k)
      if (std::abs(traj.times[k] - t) < std::abs(traj.times[best] - t)) best = k;
    const double integral = inner_m(w, u0, traj.states[best]);
    const double bound = std::exp(-dmin * dmin / (4.0 * traj.times[best])) * nu * nv;
    rep.times.push_back(traj.times[best]);
    rep.ratios.push_back(integral / bound);
    rep.max_ratio = std::max(rep.max_ratio, integral / bound);
  }
  return rep;
}

}  // namespace finsler
