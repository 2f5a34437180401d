#include "finsler/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace finsler {

namespace {

constexpr double kDensityFloor = 1e-12;
constexpr double kPi = 3.14159265358979323846;

void check_1d(const Grid& g) {
  if (g.n != 1) throw std::invalid_argument("wasserstein: 1D grid required");
}

// Piecewise-linear CDF of a cell-wise density; breakpoints at cell edges.
struct Cdf {
  std::vector<double> x;
  std::vector<double> F;
};

Cdf cdf_of(const std::vector<double>& rho, const Grid& g, const WeightField& w) {
  const int N = g.cells[0];
  Cdf c;
  c.x.resize(N + 1);
  c.F.resize(N + 1);
  c.x[0] = g.origin[0];
  c.F[0] = 0.0;
  for (int i = 0; i < N; ++i) {
    c.x[i + 1] = g.origin[0] + (i + 1) * g.h[0];
    c.F[i + 1] = c.F[i] + rho[i] * w.cell_m[i];
  }
  const double total = c.F[N];
  if (std::abs(total - 1.0) > 1e-8) throw std::invalid_argument("density mass != 1");
  for (auto& f : c.F) f /= total;
  return c;
}

// Quantile with support-edge conventions on flat CDF stretches: levels inside
// a flat region map to its right end (left end at s = 1), so zero-density
// margins do not leak into the transport cost.
double quantile(const Cdf& c, double s) {
  s = std::clamp(s, 0.0, 1.0);
  if (s >= 1.0) {
    const auto it = std::lower_bound(c.F.begin(), c.F.end(), 1.0);
    return c.x[static_cast<std::size_t>(it - c.F.begin())];
  }
  const auto it = std::upper_bound(c.F.begin(), c.F.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - c.F.begin());
  if (c.F[i - 1] >= s) return c.x[i - 1];
  const double t = (s - c.F[i - 1]) / (c.F[i] - c.F[i - 1]);
  return c.x[i - 1] + t * (c.x[i] - c.x[i - 1]);
}

std::vector<double> quantiles_at_levels(const std::vector<double>& rho, const Grid& g,
                                        const WeightField& w, int S) {
  Cdf c = cdf_of(rho, g, w);
  std::vector<double> Q(S);
  for (int k = 0; k < S; ++k) Q[k] = quantile(c, static_cast<double>(k) / S);
  return Q;
}

// 1D Minkowski norms are two-slope: F(v) = a v (v >= 0), -b v (v < 0).
struct Slopes {
  double a, b;
};

Slopes slopes_of(const Norm& n) {
  if (n.dim() != 1) throw std::invalid_argument("1D norm required");
  VecN e(1);
  e[0] = 1.0;
  const double a = n.value(e);
  e[0] = -1.0;
  const double b = n.value(e);
  return {a, b};
}

}  // namespace

Density1D make_density(const Grid& g, const WeightField& w, std::vector<double> rho,
                       bool normalize, int levels) {
  check_1d(g);
  if (rho.size() != g.ncells()) throw std::invalid_argument("make_density: size mismatch");
  for (double r : rho)
    if (r < 0.0) throw std::invalid_argument("make_density: negative density");
  double m = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) m += rho[i] * w.cell_m[i];
  if (normalize) {
    if (!(m > 0.0)) throw std::invalid_argument("make_density: zero mass");
    for (auto& r : rho) r /= m;
  } else if (std::abs(m - 1.0) > 1e-10) {
    throw std::invalid_argument("make_density: mass != 1");
  }
  Density1D mu;
  mu.grid = g;
  mu.rho = std::move(rho);
  mu.levels = levels;
  // cache levels+1 entries: k/S for k = 0..S (support edges at both ends)
  Cdf c = cdf_of(mu.rho, g, w);
  mu.quantiles.resize(levels + 1);
  for (int k = 0; k <= levels; ++k)
    mu.quantiles[k] = quantile(c, static_cast<double>(k) / levels);
  return mu;
}

double w2_distance(const Density1D& mu, const Density1D& nu, const Norm& norm1d) {
  if (mu.grid.cells[0] != nu.grid.cells[0] || mu.quantiles.size() != nu.quantiles.size())
    throw std::invalid_argument("w2_distance: shared grid and levels required");
  const Slopes sl = slopes_of(norm1d);
  const auto& Qm = mu.quantiles;  // levels+1 entries, k/S for k = 0..S
  const auto& Qn = nu.quantiles;
  const int S = mu.levels;

  auto f2 = [&](double d) {
    const double c = d >= 0 ? sl.a : sl.b;
    return c * c * d * d;
  };
  // integral over one level interval of F(d(s))^2 with d linear d0 -> d1;
  // piecewise quadratic, split at the sign change
  auto seg_cost = [&](double d0, double d1) {
    if ((d0 >= 0) == (d1 >= 0)) {
      const double dm = 0.5 * (d0 + d1);
      return (f2(d0) + 4.0 * f2(dm) + f2(d1)) / 6.0 / S;
    }
    const double tz = d0 / (d0 - d1);
    const double c0 = d0 >= 0 ? sl.a : sl.b;
    const double c1 = d1 >= 0 ? sl.a : sl.b;
    return (c0 * c0 * d0 * d0 * tz + c1 * c1 * d1 * d1 * (1.0 - tz)) / 3.0 / S;
  };

  double acc = 0.0;
  for (int k = 0; k < S; ++k)
    acc += seg_cost(Qn[k] - Qm[k], Qn[k + 1] - Qm[k + 1]);
  return std::sqrt(acc);
}

ScalarField c_transform(const ScalarField& phi, const FinslerField& field, CTransform dir) {
  const Grid& g = field.grid();
  if (!field.uniform()) throw std::invalid_argument("c_transform: uniform field required");
  const Norm& norm = *field.uniform_norm();
  const bool periodic = g.boundary == Boundary::periodic;
  const int K = periodic ? 1 : 0;
  const std::size_t n = g.ncells();
  ScalarField out(g);

  std::vector<VecN> centers(n);
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) centers[g.index(i, j, k)] = g.cell_center(i, j, k);

  auto dist = [&](std::size_t from, std::size_t to) {
    double best = std::numeric_limits<double>::infinity();
    for (int tk = -(g.n > 2 ? K : 0); tk <= (g.n > 2 ? K : 0); ++tk)
      for (int tj = -(g.n > 1 ? K : 0); tj <= (g.n > 1 ? K : 0); ++tj)
        for (int ti = -K; ti <= K; ++ti) {
          VecN v = centers[to] - centers[from];
          v[0] += ti * g.length(0);
          if (g.n > 1) v[1] += tj * g.length(1);
          if (g.n > 2) v[2] += tk * g.length(2);
          best = std::min(best, norm.value(v));
        }
    return best;
  };

  for (std::size_t o = 0; o < n; ++o) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      const double d = (dir == CTransform::c) ? dist(s, o) : dist(o, s);
      m = std::min(m, 0.5 * d * d - phi[s]);
    }
    out[o] = m;
  }
  return out;
}

CConcavityReport cconcavity_check(const ScalarField& phi, const FinslerField& field,
                                  const WeightField& w) {
  const Grid& g = field.grid();
  if (!field.uniform()) throw std::invalid_argument("cconcavity_check: uniform field required");
  (void)w;
  CConcavityReport rep;
  for (double v : phi.v) rep.sup_abs = std::max(rep.sup_abs, std::abs(v));

  ScalarField neg(g);
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -phi[i];
  FaceCovectors d = derivative(g, neg);
  VecN a(g.n);
  for (int dd = 0; dd < g.n; ++dd) {
    const std::size_t nf = g.nfaces(dd);
    for (std::size_t f = 0; f < nf; ++f) {
      for (int c = 0; c < g.n; ++c) a[c] = d.comp[dd][f * g.n + c];
      rep.sup_grad = std::max(rep.sup_grad, field.face_norm(dd, f).dual_value(a));
    }
  }

  // second differences along stencil rays, normalized to unit speed
  const bool periodic = g.boundary == Boundary::periodic;
  std::vector<std::array<int, 3>> rays = {{1, 0, 0}};
  if (g.n > 1) {
    rays.push_back({0, 1, 0});
    rays.push_back({1, 1, 0});
    rays.push_back({1, -1, 0});
  }
  const NormPtr nrm = field.uniform_norm();
  for (const auto& ray : rays) {
    VecN step(g.n);
    for (int x = 0; x < g.n; ++x) step[x] = ray[x] * g.h[x];
    const double fs = nrm->value(step);
    for (int k = 0; k < g.cells[2]; ++k)
      for (int j = 0; j < g.cells[1]; ++j)
        for (int i = 0; i < g.cells[0]; ++i) {
          int ip = i + ray[0], im = i - ray[0];
          int jp = j + ray[1], jm = j - ray[1];
          int kp = k + ray[2], km = k - ray[2];
          if (periodic) {
            auto wmod = [](int c, int n_) { return (c % n_ + n_) % n_; };
            ip = wmod(ip, g.cells[0]);
            im = wmod(im, g.cells[0]);
            jp = wmod(jp, g.cells[1]);
            jm = wmod(jm, g.cells[1]);
            kp = wmod(kp, g.cells[2]);
            km = wmod(km, g.cells[2]);
          } else {
            if (ip < 0 || ip >= g.cells[0] || im < 0 || im >= g.cells[0]) continue;
            if (g.n > 1 && (jp < 0 || jp >= g.cells[1] || jm < 0 || jm >= g.cells[1])) continue;
            if (g.n > 2 && (kp < 0 || kp >= g.cells[2] || km < 0 || km >= g.cells[2])) continue;
          }
          const double s2 = (phi[g.index(ip, jp, kp)] - 2.0 * phi[g.index(i, j, k)] +
                             phi[g.index(im, jm, km)]) /
                            (fs * fs);
          rep.max_second = std::max(rep.max_second, s2);
        }
  }

  ScalarField pc = c_transform(phi, field, CTransform::c);
  ScalarField pcc = c_transform(pc, field, CTransform::c_bar);
  for (std::size_t i = 0; i < phi.size(); ++i) rep.gap = std::max(rep.gap, pcc[i] - phi[i]);
  return rep;
}

double entropy(const Density1D& mu, const WeightField& w) {
  double e = 0.0;
  for (std::size_t i = 0; i < mu.rho.size(); ++i) {
    const double r = mu.rho[i];
    if (r > kDensityFloor) e += r * std::log(r) * w.cell_m[i];
  }
  return e;
}

double fisher_information(const Density1D& mu, const FinslerField& field, const WeightField& w) {
  const Grid& g = field.grid();
  check_1d(g);
  ScalarField neg(g);
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -mu.rho[i];
  FaceCovectors d = derivative(g, neg);
  double fi = 0.0;
  const int N = g.cells[0];
  const bool periodic = g.boundary == Boundary::periodic;
  const std::size_t nf = g.nfaces(0);
  VecN a(1);
  for (std::size_t f = 0; f < nf; ++f) {
    double rho_face;
    if (periodic) {
      rho_face = 0.5 * (mu.rho[f] + mu.rho[(f + 1) % N]);
    } else {
      const double lo = (f == 0) ? 0.0 : mu.rho[f - 1];
      const double hi = (f >= static_cast<std::size_t>(N)) ? 0.0 : mu.rho[f];
      rho_face = 0.5 * (lo + hi);
    }
    if (rho_face <= kDensityFloor) continue;
    a[0] = d.comp[0][f];
    const double fs = field.face_norm(0, f).dual_value(a);
    fi += fs * fs / rho_face * w.face_m[0][f];
  }
  return fi;
}

// --- JKO -------------------------------------------------------------------

namespace {

// Deposit circular quantile gaps back onto the grid (each gap carries 1/S).
std::vector<double> rasterize(const std::vector<double>& Q, const Grid& g, const WeightField& w) {
  const int N = g.cells[0];
  const int S = static_cast<int>(Q.size());
  const double L = g.length(0);
  const double x0 = g.origin[0];
  std::vector<double> mass_cells(N, 0.0);
  for (int k = 0; k < S; ++k) {
    const double a = Q[k];
    const double b = (k + 1 < S) ? Q[k + 1] : Q[0] + L;
    if (!(b > a)) continue;
    const double dens = (1.0 / S) / (b - a);
    const int i0 = static_cast<int>(std::floor((a - x0) / g.h[0]));
    const int i1 = static_cast<int>(std::ceil((b - x0) / g.h[0]));
    for (int i = i0; i < i1; ++i) {
      const double lo = std::max(a, x0 + i * g.h[0]);
      const double hi = std::min(b, x0 + (i + 1) * g.h[0]);
      if (hi > lo) mass_cells[((i % N) + N) % N] += dens * (hi - lo);
    }
  }
  std::vector<double> rho(N);
  for (int i = 0; i < N; ++i) rho[i] = mass_cells[i] / w.cell_m[i];
  return rho;
}

double weight_V(const WeightField& w, double x) {
  const Grid& g = w.grid;
  const int N = g.cells[0];
  const double vol = g.cell_volume();
  double s = (x - g.origin[0]) / g.h[0] - 0.5;
  s -= std::floor(s / N) * N;
  const int i = static_cast<int>(std::floor(s)) % N;
  const int ip = (i + 1) % N;
  const double f = s - std::floor(s);
  return -(1.0 - f) * std::log(w.cell_m[i] / vol) - f * std::log(w.cell_m[ip] / vol);
}

// Symmetric cyclic tridiagonal SPD solve (Thomas + Sherman-Morrison).
std::vector<double> solve_cyclic(std::vector<double> diag, const std::vector<double>& off,
                                 double corner, const std::vector<double>& rhs) {
  const int n = static_cast<int>(diag.size());
  auto thomas = [&](std::vector<double> b, std::vector<double> d) {
    std::vector<double> c(off);
    for (int i = 1; i < n; ++i) {
      const double f = off[i - 1] / b[i - 1];
      b[i] -= f * c[i - 1];
      d[i] -= f * d[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    return x;
  };
  if (corner == 0.0) return thomas(diag, rhs);
  // A = T + (corner) (e_0 e_{n-1}^T + e_{n-1} e_0^T); rank-1 trick with
  // u = (gamma, 0, .., corner), v = (1, 0, .., corner/gamma)
  const double gamma = -diag[0];
  std::vector<double> b = diag;
  b[0] -= gamma;
  b[n - 1] -= corner * corner / gamma;
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = corner;
  const std::vector<double> y = thomas(b, rhs);
  const std::vector<double> z = thomas(b, u);
  const double vy = y[0] + (corner / gamma) * y[n - 1];
  const double vz = 1.0 + z[0] + (corner / gamma) * z[n - 1];
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = y[i] - z[i] * (vy / vz);
  return x;
}

struct JkoProblem {
  std::vector<double> Qmu;
  double delta;
  double L;
  Slopes sl;
  const WeightField* w = nullptr;  // nullptr: Lebesgue
  int S;

  double J1(double v) const { return v >= 0 ? sl.a * sl.a * v : sl.b * sl.b * v; }
  double J1p(double v) const { return v >= 0 ? sl.a * sl.a : sl.b * sl.b; }
  double F2(double v) const {
    const double c = v >= 0 ? sl.a : sl.b;
    return c * c * v * v;
  }
  double gap(const std::vector<double>& Q, int k) const {
    return ((k + 1 < S) ? Q[k + 1] : Q[0] + L) - Q[k];
  }

  double value(const std::vector<double>& Q) const {
    double ent = 0.0, pen = 0.0;
    for (int k = 0; k < S; ++k) {
      const double gp = gap(Q, k);
      if (!(gp > 0.0)) return std::numeric_limits<double>::infinity();
      ent += (1.0 / S) * (-std::log(S * gp));
      if (w) ent += (1.0 / S) * weight_V(*w, Q[k] + 0.5 * gp);
      pen += (1.0 / S) * F2(Q[k] - Qmu[k]);
    }
    return ent + pen / (2.0 * delta);
  }

  void grad(const std::vector<double>& Q, std::vector<double>* g) const {
    g->assign(S, 0.0);
    for (int k = 0; k < S; ++k) {
      const double gp = gap(Q, k);
      (*g)[k] += (1.0 / S) / gp;
      (*g)[(k + 1) % S] -= (1.0 / S) / gp;
      if (w) {
        const double mid = Q[k] + 0.5 * gp;
        const double hh = 1e-6 * L;
        const double dV = (weight_V(*w, mid + hh) - weight_V(*w, mid - hh)) / (2.0 * hh);
        (*g)[k] += (0.5 / S) * dV;
        (*g)[(k + 1) % S] += (0.5 / S) * dV;
      }
    }
    for (int k = 0; k < S; ++k) (*g)[k] += (1.0 / (S * delta)) * J1(Q[k] - Qmu[k]);
  }
};

// Damped Newton on the strictly convex quantile objective; the entropy term
// is its own barrier, the line search only needs to reject infeasible trials.
std::vector<double> jko_minimize(const JkoProblem& prob, int max_newton) {
  const int S = prob.S;
  std::vector<double> Q = prob.Qmu, g(S), dq(S);
  for (int k = 0; k < S; ++k)
    if (!(prob.gap(Q, k) > 0.0))
      throw std::invalid_argument("jko: initial quantiles are not strictly monotone");
  double fq = prob.value(Q);
  for (int it = 0; it < max_newton; ++it) {
    prob.grad(Q, &g);
    double gmax = 0.0;
    for (double x : g) gmax = std::max(gmax, std::abs(x));
    if (gmax < 1e-12 / (prob.delta * S) * prob.L * 1e-1 || gmax < 1e-14) break;

    std::vector<double> diag(S, 0.0), off(S - 1, 0.0);
    double corner = 0.0;
    for (int k = 0; k < S; ++k) {
      const double gp = prob.gap(Q, k);
      const double c = (1.0 / S) / (gp * gp);
      diag[k] += c;
      diag[(k + 1) % S] += c;
      if (k + 1 < S)
        off[k] -= c;
      else
        corner -= c;
    }
    for (int k = 0; k < S; ++k) diag[k] += (1.0 / (S * prob.delta)) * prob.J1p(Q[k] - prob.Qmu[k]);
    std::vector<double> rhs(S);
    for (int k = 0; k < S; ++k) rhs[k] = -g[k];
    dq = solve_cyclic(diag, off, corner, rhs);

    double gd = 0.0;
    for (int k = 0; k < S; ++k) gd += g[k] * dq[k];
    double tau = 1.0;
    std::vector<double> Qn(S);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int k = 0; k < S; ++k) Qn[k] = Q[k] + tau * dq[k];
      const double fn = prob.value(Qn);
      if (std::isfinite(fn) && fn <= fq + 1e-4 * tau * gd + 1e-18) {
        Q.swap(Qn);
        fq = fn;
        moved = true;
        break;
      }
      tau *= 0.5;
    }
    if (!moved) break;
  }
  return Q;
}

bool uniform_weight(const WeightField& w) {
  for (double m : w.cell_m)
    if (std::abs(m - w.cell_m[0]) > 1e-14 * std::abs(w.cell_m[0])) return false;
  return true;
}

JkoProblem make_problem(const std::vector<double>& Qmu, const Norm& norm1d, const WeightField& w,
                        double delta, double L, int S) {
  JkoProblem p;
  p.Qmu = Qmu;
  p.delta = delta;
  p.L = L;
  p.sl = slopes_of(norm1d);
  p.w = uniform_weight(w) ? nullptr : &w;
  p.S = S;
  return p;
}

}  // namespace

Density1D jko_step(const Density1D& mu, const Norm& norm1d, const WeightField& w, double delta,
                   int max_newton) {
  check_1d(mu.grid);
  if (!(delta > 0.0)) throw std::invalid_argument("jko_step: delta must be > 0");
  if (mu.grid.boundary != Boundary::periodic)
    throw std::invalid_argument("jko_step: periodic 1D domain required");
  const int S = mu.levels;
  const std::vector<double> Qmu = quantiles_at_levels(mu.rho, mu.grid, w, S);
  const auto prob = make_problem(Qmu, norm1d, w, delta, mu.grid.length(0), S);
  const std::vector<double> Q = jko_minimize(prob, max_newton);
  return make_density(mu.grid, w, rasterize(Q, mu.grid, w), /*normalize=*/true, S);
}

JkoEquivalenceReport jko_equivalence_check(const Density1D& mu0, NormPtr norm1d,
                                           const WeightField& w, double T,
                                           const std::vector<double>& deltas,
                                           const SolverConfig& heat_cfg) {
  check_1d(mu0.grid);
  if (mu0.grid.boundary != Boundary::periodic)
    throw std::invalid_argument("jko_equivalence_check: periodic domain required");
  const Grid& g = mu0.grid;
  const int S = mu0.levels;
  const double L = g.length(0);

  ScalarField rho0(g);
  for (std::size_t i = 0; i < rho0.size(); ++i) rho0[i] = mu0.rho[i];

  FinslerField rev_field(g, norm1d->reversed());

  JkoEquivalenceReport rep;
  rep.deltas = deltas;
  auto l1 = [&](const std::vector<double>& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]) * w.cell_m[i];
    return s;
  };

  for (double delta : deltas) {
    const int nsteps = std::max(1, static_cast<int>(std::llround(T / delta)));
    const double dlt = T / nsteps;

    SolverConfig hc = heat_cfg;
    const double want = (heat_cfg.delta > 0) ? heat_cfg.delta : dlt / 16.0;
    const int sub = std::max(1, static_cast<int>(std::llround(dlt / want)));
    hc.delta = dlt / sub;
    hc.record_every = sub;
    FlowTrajectory ref = evolve(rev_field, w, rho0, T, hc);

    // chain in quantile space; rasterize only to compare
    std::vector<double> Q = quantiles_at_levels(mu0.rho, g, w, S);
    double max_err = 0.0;
    for (int s = 1; s <= nsteps; ++s) {
      const auto prob = make_problem(Q, *norm1d, w, dlt, L, S);
      Q = jko_minimize(prob, 200);
      const std::vector<double> rho = rasterize(Q, g, w);
      const double t = s * dlt;
      std::size_t best = 0;
      for (std::size_t k2 = 1; k2 < ref.times.size(); ++k2)
        if (std::abs(ref.times[k2] - t) < std::abs(ref.times[best] - t)) best = k2;
      max_err = std::max(max_err, l1(rho, ref.states[best]));
    }
    rep.max_l1_error.push_back(max_err);
  }
  for (std::size_t i = 0; i + 1 < rep.max_l1_error.size(); ++i)
    if (rep.max_l1_error[i + 1] > 0.7 * rep.max_l1_error[i]) rep.errors_decreasing = false;

  // control: distance to the same-structure flow at the final time
  {
    FinslerField fwd(g, norm1d);
    SolverConfig hc = heat_cfg;
    if (!(hc.delta > 0)) hc.delta = default_delta(fwd, w);
    FlowTrajectory fwd_traj = evolve(fwd, w, rho0, T, hc);
    const double dlast = deltas.back();
    const int nsteps = std::max(1, static_cast<int>(std::llround(T / dlast)));
    const double dlt = T / nsteps;
    std::vector<double> Q = quantiles_at_levels(mu0.rho, g, w, S);
    for (int s = 1; s <= nsteps; ++s) {
      const auto prob = make_problem(Q, *norm1d, w, dlt, L, S);
      Q = jko_minimize(prob, 200);
    }
    rep.control_error = l1(rasterize(Q, g, w), fwd_traj.states.back());
  }
  return rep;
}

double continuity_residual(const std::vector<Density1D>& traj, const std::vector<double>& times,
                           const FinslerField& field, const WeightField& w, double sign) {
  if (traj.size() != times.size() || traj.size() < 3)
    throw std::invalid_argument("continuity_residual: need >= 3 snapshots");
  const Grid& g = field.grid();
  check_1d(g);
  const int N = g.cells[0];
  const double L = g.length(0);

  const std::size_t nf = g.nfaces(0);
  std::vector<std::vector<double>> phi(traj.size(), std::vector<double>(nf, 0.0));
  std::vector<std::vector<double>> rho_face(traj.size(), std::vector<double>(nf, 0.0));
  VecN a(1);
  for (std::size_t s = 0; s < traj.size(); ++s) {
    ScalarField neg(g);
    for (int i = 0; i < N; ++i) neg[i] = -traj[s].rho[i];
    FaceCovectors d = derivative(g, neg);
    for (std::size_t f = 0; f < nf; ++f) {
      const double rf = 0.5 * (traj[s].rho[f % N] + traj[s].rho[(f + 1) % N]);
      rho_face[s][f] = rf;
      if (rf <= kDensityFloor) continue;
      a[0] = d.comp[0][f];
      phi[s][f] = sign * field.face_norm(0, f).dual_grad(a)[0] / rf;
    }
  }

  double worst = 0.0;
  for (int kmode = 1; kmode <= 3; ++kmode)
    for (int phase = 0; phase < 2; ++phase) {
      const double om = 2.0 * kPi * kmode / L;
      const double t0 = times.front(), t1 = times.back();
      auto bump = [&](double t) {
        const double s = (t - t0) / (t1 - t0);
        return s * s * (1.0 - s) * (1.0 - s) * 16.0;
      };
      auto bump_dt = [&](double t) {
        const double s = (t - t0) / (t1 - t0);
        return (2.0 * s * (1.0 - s) * (1.0 - s) - 2.0 * s * s * (1.0 - s)) * 16.0 / (t1 - t0);
      };
      auto space = [&](double x) { return (phase == 0) ? std::sin(om * x) : std::cos(om * x); };
      auto space_dx = [&](double x) {
        return (phase == 0) ? om * std::cos(om * x) : -om * std::sin(om * x);
      };
      double acc = 0.0, scale = 0.0;
      for (std::size_t s = 0; s < traj.size(); ++s) {
        const double wt = (s == 0)                    ? 0.5 * (times[1] - times[0])
                          : (s + 1 == traj.size())    ? 0.5 * (times[s] - times[s - 1])
                                                      : 0.5 * (times[s + 1] - times[s - 1]);
        double cell_term = 0.0;
        for (int i = 0; i < N; ++i) {
          const double x = g.cell_center(i)[0];
          const double v = bump_dt(times[s]) * space(x);
          cell_term += v * traj[s].rho[i] * w.cell_m[i];
          scale += std::abs(v) * traj[s].rho[i] * w.cell_m[i] * wt;
        }
        double face_term = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
          const double xf = g.face_center(0, static_cast<int>(f))[0];
          face_term += bump(times[s]) * space_dx(xf) * phi[s][f] * rho_face[s][f] * w.face_m[0][f];
        }
        acc += wt * (cell_term + face_term);
      }
      worst = std::max(worst, std::abs(acc) / std::max(scale, 1e-300));
    }
  return worst;
}

}  // namespace finsler
