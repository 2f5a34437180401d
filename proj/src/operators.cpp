#include "finsler/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace finsler {

namespace {

// Padded lattice: index component i in 0..cells+1 maps to real cell i-1.
struct Padded {
  const Grid* g;
  std::array<int, 3> dims;
  std::array<std::size_t, 3> stride;

  explicit Padded(const Grid& grid) : g(&grid) {
    for (int d = 0; d < 3; ++d) dims[d] = (d < grid.n) ? grid.cells[d] + 2 : 1;
    stride[0] = 1;
    stride[1] = dims[0];
    stride[2] = static_cast<std::size_t>(dims[0]) * dims[1];
  }
  std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  std::size_t at(int i, int j, int k) const {
    return i * stride[0] + j * stride[1] + k * stride[2];
  }
};

std::vector<double> pad_field(const Padded& p, const ScalarField& u) {
  const Grid& g = *p.g;
  std::vector<double> up(p.size(), 0.0);
  const bool periodic = g.boundary == Boundary::periodic;
  for (int k = 0; k < p.dims[2]; ++k)
    for (int j = 0; j < p.dims[1]; ++j)
      for (int i = 0; i < p.dims[0]; ++i) {
        int ci = i - 1, cj = (g.n > 1) ? j - 1 : 0, ck = (g.n > 2) ? k - 1 : 0;
        if (periodic) {
          ci = (ci % g.cells[0] + g.cells[0]) % g.cells[0];
          cj = (cj % g.cells[1] + g.cells[1]) % g.cells[1];
          ck = (ck % g.cells[2] + g.cells[2]) % g.cells[2];
        } else if (ci < 0 || ci >= g.cells[0] || (g.n > 1 && (cj < 0 || cj >= g.cells[1])) ||
                   (g.n > 2 && (ck < 0 || ck >= g.cells[2]))) {
          continue;  // ghost stays zero
        }
        up[p.at(i, j, k)] = u[g.index(ci, cj, ck)];
      }
  return up;
}

// dpad[a][q] = (upad[q + e_a] - upad[q]) / h_a; entries whose q + e_a leaves
// the pad are unused and left zero.
std::array<std::vector<double>, 3> diffs(const Padded& p, const std::vector<double>& up) {
  const Grid& g = *p.g;
  std::array<std::vector<double>, 3> d;
  for (int a = 0; a < g.n; ++a) {
    d[a].assign(p.size(), 0.0);
    for (int k = 0; k < p.dims[2]; ++k)
      for (int j = 0; j < p.dims[1]; ++j)
        for (int i = 0; i < p.dims[0]; ++i) {
          const int q[3] = {i, j, k};
          if (q[a] + 1 >= p.dims[a]) continue;
          const std::size_t idx = p.at(i, j, k);
          d[a][idx] = (up[idx + p.stride[a]] - up[idx]) / g.h[a];
        }
  }
  return d;
}

// Padded base index of face (i,j,k) in direction d: the padded coordinate of
// the lower adjacent cell.
std::size_t face_base(const Padded& p, const Grid& g, int d, int i, int j, int k) {
  // dirichlet: face i_d joins padded cells (i_d, i_d+1) = real (i_d-1, i_d);
  // periodic: face i_d joins padded (i_d+1, i_d+2) = real (i_d, i_d+1 mod N).
  const int c[3] = {i, j, k};
  int q[3] = {0, 0, 0};
  for (int x = 0; x < g.n; ++x) {
    if (x == d) {
      q[x] = (g.boundary == Boundary::periodic) ? c[x] + 1 : c[x];
    } else {
      q[x] = c[x] + 1;
    }
  }
  return p.at(q[0], q[1], q[2]);
}

template <typename PerFace>
void for_each_face(const Grid& g, int d, const PerFace& fn) {
  const auto fd = g.face_dims(d);
  std::size_t idx = 0;
  for (int k = 0; k < fd[2]; ++k)
    for (int j = 0; j < fd[1]; ++j)
      for (int i = 0; i < fd[0]; ++i, ++idx) fn(idx, i, j, k);
}

FaceCovectors gather(const Grid& g, const ScalarField& u) {
  Padded p(g);
  const auto up = pad_field(p, u);
  const auto dp = diffs(p, up);
  FaceCovectors out;
  for (int d = 0; d < g.n; ++d) {
    out.comp[d].assign(g.nfaces(d) * g.n, 0.0);
    for_each_face(g, d, [&](std::size_t f, int i, int j, int k) {
      const std::size_t q = face_base(p, g, d, i, j, k);
      double* alpha = &out.comp[d][f * g.n];
      alpha[d] = dp[d][q];
      for (int a = 0; a < g.n; ++a) {
        if (a == d) continue;
        alpha[a] = 0.25 * (dp[a][q] + dp[a][q - p.stride[a]] + dp[a][q + p.stride[d]] +
                           dp[a][q + p.stride[d] - p.stride[a]]);
      }
    });
  }
  return out;
}

// Adjoint of gather: cell values dE/du_c from per-face conjugate vectors
// scaled by face weights.  Ghost-ghost targets are accumulated into the pad
// and ignored by the fold (dirichlet) or wrapped (periodic).
ScalarField scatter(const Grid& g, const WeightField& w, const FaceVectors& pf) {
  Padded p(g);
  std::array<std::vector<double>, 3> gp;  // per-axis conjugate fluxes, diff layout
  for (int a = 0; a < g.n; ++a) gp[a].assign(p.size(), 0.0);
  const double invn = 1.0 / g.n;

  auto wrap_add = [&](int a, std::size_t q, double val) {
    if (g.boundary == Boundary::periodic) {
      // canonicalize each padded coordinate into 1..N
      int c[3] = {static_cast<int>(q % p.dims[0]),
                  static_cast<int>((q / p.dims[0]) % p.dims[1]),
                  static_cast<int>(q / (static_cast<std::size_t>(p.dims[0]) * p.dims[1]))};
      for (int x = 0; x < g.n; ++x) c[x] = ((c[x] - 1) % g.cells[x] + g.cells[x]) % g.cells[x] + 1;
      gp[a][p.at(c[0], c[1], c[2])] += val;
    } else {
      gp[a][q] += val;
    }
  };

  for (int d = 0; d < g.n; ++d) {
    for_each_face(g, d, [&](std::size_t f, int i, int j, int k) {
      const std::size_t q = face_base(p, g, d, i, j, k);
      const double wf = w.face_m[d][f] * invn;
      const double* psi = &pf.comp[d][f * g.n];
      wrap_add(d, q, wf * psi[d]);
      for (int a = 0; a < g.n; ++a) {
        if (a == d) continue;
        const double quarter = 0.25 * wf * psi[a];
        wrap_add(a, q, quarter);
        wrap_add(a, q - p.stride[a], quarter);
        wrap_add(a, q + p.stride[d], quarter);
        wrap_add(a, q + p.stride[d] - p.stride[a], quarter);
      }
    });
  }

  ScalarField r(g);
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const std::size_t q = p.at(i + 1, (g.n > 1) ? j + 1 : 0, (g.n > 2) ? k + 1 : 0);
        double s = 0.0;
        for (int a = 0; a < g.n; ++a)
          s += (gp[a][q - p.stride[a]] - gp[a][q]) / g.h[a];
        r[g.index(i, j, k)] = s;  // dE/du_c
      }
  return r;
}

bool is_boundary_face(const Grid& g, int d, int i, int j, int k) {
  if (g.boundary == Boundary::periodic) return false;
  const int c[3] = {i, j, k};
  return c[d] == 0 || c[d] == g.cells[d];
}

// Frozen coefficient at zero-gradient faces: g(x, Z)^{-1} with Z = e_1.
// Norms whose Hessian is singular along e_1 (lp with p != 2) fall back to
// the diagonal direction, then to the identity.
MatN fallback_coefficient(const Norm& norm, const VecN& z) {
  auto usable = [](const MatN& m) {
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j)
        if (!std::isfinite(m(i, j))) return false;
    return std::abs(det(m)) > 1e-300;
  };
  try {
    MatN h = norm.hess(z);
    if (usable(h)) return inverse(h);
  } catch (const degenerate_point_error&) {
  }
  VecN ones(z.n);
  for (int i = 0; i < z.n; ++i) ones[i] = 1.0;
  try {
    MatN h = norm.hess(ones);
    if (usable(h)) return inverse(h);
  } catch (const degenerate_point_error&) {
  }
  return MatN::identity(z.n);
}

}  // namespace

FaceCovectors derivative(const Grid& g, const ScalarField& u) {
  if (u.size() != g.ncells()) throw std::invalid_argument("derivative: field/grid mismatch");
  return gather(g, u);
}

FaceVectors gradient(const FinslerField& field, const ScalarField& u) {
  const Grid& g = field.grid();
  FaceCovectors alpha = gather(g, u);
  FaceVectors out;
  VecN a(g.n);
  for (int d = 0; d < g.n; ++d) {
    out.comp[d].assign(alpha.comp[d].size(), 0.0);
    const std::size_t nf = g.nfaces(d);
    for (std::size_t f = 0; f < nf; ++f) {
      for (int c = 0; c < g.n; ++c) a[c] = alpha.comp[d][f * g.n + c];
      const VecN v = field.face_norm(d, f).dual_grad(a);
      for (int c = 0; c < g.n; ++c) out.comp[d][f * g.n + c] = v[c];
    }
  }
  return out;
}

double pairing(const WeightField& w, const FaceCovectors& alpha, const FaceVectors& psi) {
  const Grid& g = w.grid;
  double s = 0.0;
  for (int d = 0; d < g.n; ++d) {
    const std::size_t nf = g.nfaces(d);
    for (std::size_t f = 0; f < nf; ++f) {
      double dp = 0.0;
      for (int c = 0; c < g.n; ++c) dp += alpha.comp[d][f * g.n + c] * psi.comp[d][f * g.n + c];
      s += dp * w.face_m[d][f];
    }
  }
  return s / g.n;
}

ScalarField divergence(const Grid& g, const WeightField& w, const FaceVectors& psi) {
  ScalarField dE = scatter(g, w, psi);
  ScalarField r(g);
  for (std::size_t c = 0; c < r.size(); ++c) r[c] = -dE[c] / w.cell_m[c];
  return r;
}

EnergyReport energy(const FinslerField& field, const WeightField& w, const ScalarField& u) {
  const Grid& g = field.grid();
  EnergyReport rep;
  if (g.boundary == Boundary::periodic) {
    FaceCovectors alpha = gather(g, u);
    VecN a(g.n);
    for (int d = 0; d < g.n; ++d)
      for_each_face(g, d, [&](std::size_t f, int, int, int) {
        for (int c = 0; c < g.n; ++c) a[c] = alpha.comp[d][f * g.n + c];
        const double fs = field.face_norm(d, f).dual_value(a);
        rep.energy += 0.5 * fs * fs * w.face_m[d][f] / g.n;
      });
    return rep;
  }
  // Dirichlet: open-domain energy.  Only real-real differences enter; the
  // transverse averages renormalize over the differences present.
  Padded p(g);
  const auto up = pad_field(p, u);
  auto dp = diffs(p, up);
  // mask of real-real differences
  std::array<std::vector<std::uint8_t>, 3> real_diff;
  for (int a = 0; a < g.n; ++a) {
    real_diff[a].assign(p.size(), 0);
    for (int k = 0; k < p.dims[2]; ++k)
      for (int j = 0; j < p.dims[1]; ++j)
        for (int i = 0; i < p.dims[0]; ++i) {
          const int q[3] = {i, j, k};
          bool ok = true;
          for (int x = 0; x < g.n; ++x) {
            const int lo = q[x], hi = q[x] + (x == a ? 1 : 0);
            if (lo < 1 || hi > g.cells[x]) ok = false;
          }
          if (ok) real_diff[a][p.at(i, j, k)] = 1;
        }
  }
  VecN a(g.n);
  for (int d = 0; d < g.n; ++d) {
    for_each_face(g, d, [&](std::size_t f, int i, int j, int k) {
      if (is_boundary_face(g, d, i, j, k)) return;
      const std::size_t q = face_base(p, g, d, i, j, k);
      a[d] = dp[d][q];
      for (int t = 0; t < g.n; ++t) {
        if (t == d) continue;
        const std::size_t qs[4] = {q, q - p.stride[t], q + p.stride[d],
                                   q + p.stride[d] - p.stride[t]};
        double sum = 0.0;
        int cnt = 0;
        for (std::size_t qq : qs)
          if (real_diff[t][qq]) {
            sum += dp[t][qq];
            ++cnt;
          }
        a[t] = (cnt > 0) ? sum / cnt : 0.0;
      }
      const double fs = field.face_norm(d, f).dual_value(a);
      rep.energy += 0.5 * fs * fs * w.face_m[d][f] / g.n;
    });
  }
  return rep;
}

double flow_energy(const FinslerField& field, const WeightField& w, const ScalarField& u) {
  const Grid& g = field.grid();
  FaceCovectors alpha = gather(g, u);
  double e = 0.0;
  VecN a(g.n);
  for (int d = 0; d < g.n; ++d)
    for_each_face(g, d, [&](std::size_t f, int, int, int) {
      for (int c = 0; c < g.n; ++c) a[c] = alpha.comp[d][f * g.n + c];
      const double fs = field.face_norm(d, f).dual_value(a);
      e += 0.5 * fs * fs * w.face_m[d][f] / g.n;
    });
  return e;
}

ScalarField laplacian(const FinslerField& field, const WeightField& w, const ScalarField& u) {
  return divergence(field.grid(), w, gradient(field, u));
}

std::pair<double, ScalarField> flow_energy_laplacian(const FinslerField& field,
                                                     const WeightField& w, const ScalarField& u) {
  const Grid& g = field.grid();
  FaceCovectors alpha = gather(g, u);
  FaceVectors psi;
  double e = 0.0;
  VecN a(g.n);
  for (int d = 0; d < g.n; ++d) {
    psi.comp[d].assign(alpha.comp[d].size(), 0.0);
    const std::size_t nf = g.nfaces(d);
    for (std::size_t f = 0; f < nf; ++f) {
      for (int c = 0; c < g.n; ++c) a[c] = alpha.comp[d][f * g.n + c];
      const VecN v = field.face_norm(d, f).dual_grad(a);
      double dp = 0.0;
      for (int c = 0; c < g.n; ++c) {
        psi.comp[d][f * g.n + c] = v[c];
        dp += a[c] * v[c];
      }
      e += 0.5 * dp * w.face_m[d][f] / g.n;
    }
  }
  return {e, divergence(g, w, psi)};
}

ScalarField weighted_laplacian(const FinslerField& field, const WeightField& w,
                               const ScalarField& u, const ScalarField& wfun) {
  const Grid& g = field.grid();
  FaceCovectors au = gather(g, u);
  FaceCovectors aw = gather(g, wfun);
  // frozen coefficient threshold relative to the largest derivative sample
  double scale = 0.0;
  for (int d = 0; d < g.n; ++d)
    for (double x : au.comp[d]) scale = std::max(scale, std::abs(x));
  const double tol = 1e-12 * scale;

  FaceVectors psi;
  VecN a(g.n), b(g.n), z(g.n);
  z[0] = 1.0;  // fallback direction Z = e_1 at zero-gradient faces
  for (int d = 0; d < g.n; ++d) {
    psi.comp[d].assign(aw.comp[d].size(), 0.0);
    const std::size_t nf = g.nfaces(d);
    for (std::size_t f = 0; f < nf; ++f) {
      for (int c = 0; c < g.n; ++c) {
        a[c] = au.comp[d][f * g.n + c];
        b[c] = aw.comp[d][f * g.n + c];
      }
      const Norm& norm = field.face_norm(d, f);
      MatN gs(g.n);
      if (norm_inf(a) <= tol || scale == 0.0) {
        gs = fallback_coefficient(norm, z);
      } else {
        gs = norm.dual_hess(a);
      }
      const VecN v = matvec(gs, b);
      for (int c = 0; c < g.n; ++c) psi.comp[d][f * g.n + c] = v[c];
    }
  }
  return divergence(g, w, psi);
}

double inner_m(const WeightField& w, const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * w.cell_m[i];
  return s;
}

}  // namespace finsler
