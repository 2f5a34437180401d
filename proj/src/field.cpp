#include "finsler/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace finsler {

Grid build_grid(const GridSpec& spec) {
  if (spec.dim < 1 || spec.dim > 3) throw std::invalid_argument("grid dim must be 1..3");
  Grid g;
  g.n = spec.dim;
  g.boundary = spec.boundary;
  for (int d = 0; d < 3; ++d) {
    g.cells[d] = (d < spec.dim) ? spec.cells[d] : 1;
    if (d < spec.dim) {
      if (g.cells[d] < 3) throw std::invalid_argument("grid needs >= 3 cells per axis");
      if (!(spec.lengths[d] > 0.0)) throw std::invalid_argument("grid lengths must be > 0");
      g.h[d] = spec.lengths[d] / g.cells[d];
      g.origin[d] = spec.origin[d];
    } else {
      g.h[d] = 1.0;
      g.origin[d] = 0.0;
    }
  }
  return g;
}

ScalarField sample(const Grid& g, const std::function<double(const VecN&)>& f) {
  ScalarField u(g);
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) u[g.index(i, j, k)] = f(g.cell_center(i, j, k));
  return u;
}

WeightField build_weight(const Grid& g, const std::function<double(const VecN&)>& V) {
  WeightField w;
  w.grid = g;
  const double vol = g.cell_volume();
  w.cell_m.resize(g.ncells());
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const double Vx = V(g.cell_center(i, j, k));
        if (!std::isfinite(Vx)) throw std::invalid_argument("weight V must be bounded on the grid");
        w.cell_m[g.index(i, j, k)] = std::exp(-Vx) * vol;
      }
  for (int d = 0; d < g.n; ++d) {
    const auto fd = g.face_dims(d);
    w.face_m[d].resize(g.nfaces(d));
    std::size_t idx = 0;
    for (int k = 0; k < fd[2]; ++k)
      for (int j = 0; j < fd[1]; ++j)
        for (int i = 0; i < fd[0]; ++i, ++idx)
          w.face_m[d][idx] = std::exp(-V(g.face_center(d, i, j, k))) * vol;
  }
  w.total_mass = 0.0;
  for (double m : w.cell_m) w.total_mass += m;
  return w;
}

WeightField build_weight_zero(const Grid& g) {
  return build_weight(g, [](const VecN&) { return 0.0; });
}

FinslerField::FinslerField(Grid g, NormPtr uniform_norm)
    : grid_(g), norm_(std::move(uniform_norm)) {
  if (norm_->dim() != g.n) throw invalid_norm_error("field: norm dim != grid dim");
}

FinslerField::FinslerField(Grid g, NormPtr base, std::function<MatN(const VecN&)> sigma)
    : grid_(g), norm_(std::move(base)), sigma_(std::move(sigma)) {
  if (norm_->dim() != g.n) throw invalid_norm_error("field: norm dim != grid dim");
  for (int d = 0; d < grid_.n; ++d) {
    const auto fd = grid_.face_dims(d);
    face_norms_[d].resize(grid_.nfaces(d));
    std::size_t idx = 0;
    for (int k = 0; k < fd[2]; ++k)
      for (int j = 0; j < fd[1]; ++j)
        for (int i = 0; i < fd[0]; ++i, ++idx) {
          const MatN s = sigma_(grid_.face_center(d, i, j, k));
          if (std::abs(det(s)) < 1e-14) throw invalid_norm_error("field: sigma not invertible");
          face_norms_[d][idx] = make_deformed(norm_, s);
        }
  }
}

NormPtr FinslerField::norm_at(const VecN& x) const {
  if (uniform()) return norm_;
  return make_deformed(norm_, sigma_(x));
}

ConvexityConstants FinslerField::field_constants(int per_cell_budget, std::uint64_t seed) const {
  if (uniform()) return convexity_constants(*norm_, per_cell_budget, seed);
  ConvexityConstants cc;
  bool first = true;
  // Sampled cells: corners, center, and a coarse stride; infimum over cells.
  const int stride = std::max(1, grid_.cells[0] / 8);
  for (int k = 0; k < grid_.cells[2]; k += std::max(1, grid_.cells[2] / 8))
    for (int j = 0; j < grid_.cells[1]; j += std::max(1, grid_.cells[1] / 8))
      for (int i = 0; i < grid_.cells[0]; i += stride) {
        const auto n = norm_at(grid_.cell_center(i, j, k));
        const auto c = convexity_constants(*n, per_cell_budget, seed);
        if (first) {
          cc = c;
          first = false;
        } else {
          cc.kappa = std::min(cc.kappa, c.kappa);
          cc.kappa_star = std::min(cc.kappa_star, c.kappa_star);
          cc.lambda = std::min(cc.lambda, c.lambda);
          cc.lambda_star = std::min(cc.lambda_star, c.lambda_star);
          cc.kappa_degenerate |= c.kappa_degenerate;
          cc.kappa_star_degenerate |= c.kappa_star_degenerate;
          cc.lambda_degenerate |= c.lambda_degenerate;
          cc.lambda_star_degenerate |= c.lambda_star_degenerate;
        }
      }
  cc.sample_budget = per_cell_budget;
  cc.seed = seed;
  return cc;
}

FinslerField FinslerField::reversed() const {
  if (uniform()) return FinslerField(grid_, norm_->reversed());
  return FinslerField(grid_, norm_->reversed(), sigma_);
}

namespace {


DistanceField exact_uniform_distance(const FinslerField& field, const std::array<int, 3>& z,
                                     DistanceDirection dir) {
  const Grid& g = field.grid();
  const Norm& norm = *field.uniform_norm();
  DistanceField out;
  out.d = ScalarField(g);
  out.cut_mask.assign(g.ncells(), 0);
  const VecN zx = g.cell_center(z[0], z[1], z[2]);
  const bool periodic = g.boundary == Boundary::periodic;
  const int K = periodic ? 2 : 0;
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const VecN x = g.cell_center(i, j, k);
        double best = std::numeric_limits<double>::infinity();
        double second = best;
        for (int tk = -(g.n > 2 ? K : 0); tk <= (g.n > 2 ? K : 0); ++tk)
          for (int tj = -(g.n > 1 ? K : 0); tj <= (g.n > 1 ? K : 0); ++tj)
            for (int ti = -K; ti <= K; ++ti) {
              VecN xt = x;
              xt[0] += ti * g.length(0);
              if (g.n > 1) xt[1] += tj * g.length(1);
              if (g.n > 2) xt[2] += tk * g.length(2);
              const VecN v = (dir == DistanceDirection::from_z) ? xt - zx : zx - xt;
              const double c = norm.value(v);
              if (c < best) {
                second = best;
                best = c;
              } else if (c < second) {
                second = c;
              }
            }
        const std::size_t idx = g.index(i, j, k);
        out.d[idx] = best;
        if (periodic) {
          const double margin = g.hmax() * std::max(1e-12, best) /
                                std::max(1e-12, norm2(x - zx) + g.hmax());
          if (second - best < margin) out.cut_mask[idx] = 1;
        }
      }
  return out;
}

// Wide Dijkstra stencil: 2D uses all coprime offsets with |.|_inf <= 3
// (32 rays, <= 2% anisotropy error on uniform norms); 3D uses the 26
// king moves plus the 6 double-axis steps.
std::vector<std::array<int, 3>> stencil_offsets(int n) {
  std::vector<std::array<int, 3>> offs;
  auto igcd = [](int a, int b) {
    a = std::abs(a);
    b = std::abs(b);
    while (b) {
      const int t = a % b;
      a = b;
      b = t;
    }
    return a;
  };
  if (n == 1) {
    offs.push_back({1, 0, 0});
    offs.push_back({-1, 0, 0});
  } else if (n == 2) {
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j) {
        if (i == 0 && j == 0) continue;
        if (igcd(i, j) != 1) continue;
        offs.push_back({i, j, 0});
      }
  } else {
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j)
        for (int k = -1; k <= 1; ++k) {
          if (i == 0 && j == 0 && k == 0) continue;
          offs.push_back({i, j, k});
        }
    for (int d = 0; d < 3; ++d)
      for (int s : {-2, 2}) {
        std::array<int, 3> o{0, 0, 0};
        o[d] = s;
        offs.push_back(o);
      }
  }
  return offs;
}

DistanceField dijkstra_distance(const FinslerField& field, const std::array<int, 3>& z,
                                DistanceDirection dir) {
  const Grid& g = field.grid();
  DistanceField out;
  out.d = ScalarField(g, std::numeric_limits<double>::infinity());
  out.cut_mask.assign(g.ncells(), 0);
  const auto offs = stencil_offsets(g.n);
  const bool periodic = g.boundary == Boundary::periodic;

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  const std::size_t src = g.index(z[0], z[1], z[2]);
  out.d[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    const auto [du, uidx] = pq.top();
    pq.pop();
    if (du > out.d[uidx]) continue;
    int ui, uj, uk;
    g.coords(uidx, &ui, &uj, &uk);
    const VecN xu = g.cell_center(ui, uj, uk);
    for (const auto& o : offs) {
      int vi = ui + o[0], vj = uj + o[1], vk = uk + o[2];
      if (periodic) {
        vi = (vi % g.cells[0] + g.cells[0]) % g.cells[0];
        vj = (vj % g.cells[1] + g.cells[1]) % g.cells[1];
        vk = (vk % g.cells[2] + g.cells[2]) % g.cells[2];
      } else if (vi < 0 || vi >= g.cells[0] || vj < 0 || vj >= g.cells[1] || vk < 0 ||
                 vk >= g.cells[2]) {
        continue;
      }
      VecN step(g.n);
      for (int d = 0; d < g.n; ++d) step[d] = o[d] * g.h[d];
      VecN mid = xu;
      for (int d = 0; d < g.n; ++d) mid[d] += 0.5 * step[d];
      const auto norm = field.norm_at(mid);
      // from_z walks forward along d(z, .); to_z accumulates d(., z), i.e.
      // edges are traversed against the norm orientation.
      const double cost = (dir == DistanceDirection::from_z) ? norm->value(step)
                                                             : norm->value(-1.0 * step);
      const std::size_t vidx = g.index(vi, vj, vk);
      if (du + cost < out.d[vidx]) {
        out.d[vidx] = du + cost;
        pq.push({out.d[vidx], vidx});
      }
    }
  }
  return out;
}

}  // namespace

DistanceField distance_field(const FinslerField& field, const std::array<int, 3>& z,
                             DistanceDirection dir) {
  const Grid& g = field.grid();
  for (int d = 0; d < g.n; ++d)
    if (z[d] < 0 || z[d] >= g.cells[d]) throw std::invalid_argument("distance_field: z outside grid");
  if (field.uniform()) return exact_uniform_distance(field, z, dir);
  return dijkstra_distance(field, z, dir);
}

double lp_norm(const ScalarField& u, const WeightField& w, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : u.v) m = std::max(m, std::abs(x));
    return m;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p >= 1 required");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::pow(std::abs(u[i]), p) * w.cell_m[i];
  return std::pow(s, 1.0 / p);
}

double mass(const ScalarField& u, const WeightField& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * w.cell_m[i];
  return s;
}

}  // namespace finsler
