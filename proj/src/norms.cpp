#include "finsler/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <vector>

namespace finsler {

using nlohmann::json;

namespace {

constexpr double kZeroTol = 1e-14;

bool near_zero(const VecN& xi) { return norm_inf(xi) < kZeroTol; }

json mat_to_json(const MatN& m) {
  json rows = json::array();
  for (int i = 0; i < m.n; ++i) {
    json row = json::array();
    for (int j = 0; j < m.n; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

MatN mat_from_json(const json& j) {
  const int n = static_cast<int>(j.size());
  MatN m(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

json vec_to_json(const VecN& v) {
  json a = json::array();
  for (int i = 0; i < v.n; ++i) a.push_back(v[i]);
  return a;
}

VecN vec_from_json(const json& j) {
  VecN v(static_cast<int>(j.size()));
  for (int i = 0; i < v.n; ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

// Generic dual via the variational characterization ----------------------

VecN dual_grad_newton(const Norm& n, const VecN& alpha) {
  if (near_zero(alpha)) return VecN(n.dim());
  const double scale = norm_inf(alpha);
  // Initial guess: scale alpha to unit size, then one Hessian solve.
  VecN xi = (1.0 / scale) * alpha;
  {
    const double f = n.value(xi);
    if (f > 0 && std::isfinite(f)) xi = (1.0 / f) * xi;
    MatN g = n.hess(xi);
    bool ok = true;
    for (int i = 0; i < g.n && ok; ++i)
      for (int j = 0; j < g.n && ok; ++j) ok = std::isfinite(g(i, j));
    if (ok) {
      try {
        xi = solve(g, alpha);
      } catch (const std::runtime_error&) {
      }
    }
  }
  if (near_zero(xi)) xi = (1.0 / scale) * alpha;

  auto resid = [&](const VecN& x) { return n.grad(x) - alpha; };
  VecN r = resid(xi);
  double rn = norm_inf(r);
  for (int it = 0; it < 200 && rn > 1e-12 * scale; ++it) {
    MatN g = n.hess(xi);
    VecN dx;
    try {
      dx = solve(g, r);
    } catch (const std::runtime_error&) {
      dx = (1.0 / (1.0 + rn)) * r;
    }
    double tau = 1.0;
    VecN xi_new = xi - tau * dx;
    double rn_new = norm_inf(resid(xi_new));
    while ((!std::isfinite(rn_new) || rn_new > (1.0 - 0.25 * tau) * rn) && tau > 1e-8) {
      tau *= 0.5;
      xi_new = xi - tau * dx;
      rn_new = norm_inf(resid(xi_new));
    }
    if (!std::isfinite(rn_new) || rn_new >= rn) {
      // Quasi-Newton stalled (e.g. full-mode regularization where hess() is
      // not the exact Jacobian of grad()); refresh with a finite-difference
      // Jacobian of the map.
      MatN jac(alpha.n);
      const double h = 1e-7 * (1.0 + norm_inf(xi));
      for (int j = 0; j < alpha.n; ++j) {
        VecN xp = xi, xm = xi;
        xp[j] += h;
        xm[j] -= h;
        VecN d = (1.0 / (2 * h)) * (n.grad(xp) - n.grad(xm));
        for (int i = 0; i < alpha.n; ++i) jac(i, j) = d[i];
      }
      try {
        dx = solve(jac, r);
      } catch (const std::runtime_error&) {
        break;
      }
      tau = 1.0;
      xi_new = xi - tau * dx;
      rn_new = norm_inf(resid(xi_new));
      while ((!std::isfinite(rn_new) || rn_new > rn) && tau > 1e-10) {
        tau *= 0.5;
        xi_new = xi - tau * dx;
        rn_new = norm_inf(resid(xi_new));
      }
      if (!std::isfinite(rn_new) || rn_new >= rn) break;
    }
    xi = xi_new;
    r = resid(xi);
    rn = norm_inf(r);
  }
  return xi;
}

double Norm::dual_value(const VecN& alpha) const {
  if (near_zero(alpha)) return 0.0;
  return value(dual_grad(alpha));
}

VecN Norm::dual_grad(const VecN& alpha) const { return dual_grad_newton(*this, alpha); }

MatN Norm::dual_hess(const VecN& alpha) const {
  if (near_zero(alpha)) throw degenerate_point_error("dual hessian at zero covector");
  return inverse(hess(dual_grad(alpha)));
}

// quadratic(A): F^2 = xi.A.xi ------------------------------------------

class QuadraticNorm final : public Norm {
 public:
  QuadraticNorm(const MatN& a) : Norm(a.n), a_(a), ainv_(inverse(a)) {
    if (!is_spd(a)) throw invalid_norm_error("quadratic norm requires an SPD matrix");
  }
  double value(const VecN& xi) const override { return std::sqrt(std::max(0.0, dot(xi, matvec(a_, xi)))); }
  VecN grad(const VecN& xi) const override { return matvec(a_, xi); }
  MatN hess(const VecN&) const override { return a_; }
  double dual_value(const VecN& al) const override {
    return std::sqrt(std::max(0.0, dot(al, matvec(ainv_, al))));
  }
  VecN dual_grad(const VecN& al) const override { return matvec(ainv_, al); }
  MatN dual_hess(const VecN&) const override { return ainv_; }
  NormPtr reversed() const override { return std::make_shared<QuadraticNorm>(a_); }
  void to_json(json& j) const override {
    j = json{{"variant", "quadratic"}, {"dim", dim_}, {"a", mat_to_json(a_)}};
  }

 private:
  MatN a_, ainv_;
};

// lp(p): F = ||.||_p, dual exponent q = p/(p-1) ---------------------------

namespace {

double lp_value_impl(const VecN& xi, double p) {
  double s = 0.0;
  for (int i = 0; i < xi.n; ++i) s += std::pow(std::abs(xi[i]), p);
  return std::pow(s, 1.0 / p);
}

VecN lp_grad_impl(const VecN& xi, double p) {
  VecN r(xi.n);
  const double nv = lp_value_impl(xi, p);
  if (nv < kZeroTol) return r;
  const double c = std::pow(nv, 2.0 - p);
  for (int i = 0; i < xi.n; ++i)
    r[i] = (xi[i] == 0.0) ? 0.0 : c * std::pow(std::abs(xi[i]), p - 2.0) * xi[i];
  return r;
}

// g = (2-p) n^{2-2p} w w^T + (p-1) n^{2-p} diag(|xi_i|^{p-2}),  w_i = |xi_i|^{p-2} xi_i.
// Entries blow up (p < 2) or vanish (p > 2) where a component is zero.
MatN lp_hess_impl(const VecN& xi, double p) {
  const double nv = lp_value_impl(xi, p);
  if (nv < kZeroTol) throw degenerate_point_error("lp hessian at zero vector");
  MatN g(xi.n);
  VecN w(xi.n);
  for (int i = 0; i < xi.n; ++i)
    w[i] = (xi[i] == 0.0) ? 0.0 : std::pow(std::abs(xi[i]), p - 2.0) * xi[i];
  const double c1 = (2.0 - p) * std::pow(nv, 2.0 - 2.0 * p);
  const double c2 = (p - 1.0) * std::pow(nv, 2.0 - p);
  for (int i = 0; i < xi.n; ++i) {
    for (int j = 0; j < xi.n; ++j) g(i, j) = c1 * w[i] * w[j];
    const double d = (xi[i] == 0.0) ? ((p < 2.0) ? std::numeric_limits<double>::infinity() : 0.0)
                                    : std::pow(std::abs(xi[i]), p - 2.0);
    g(i, i) += c2 * d;
  }
  return g;
}

}  // namespace

class LpNorm final : public Norm {
 public:
  LpNorm(int dim, double p) : Norm(dim), p_(p), q_(p / (p - 1.0)) {
    if (!(p > 1.0) || !std::isfinite(p)) throw invalid_norm_error("lp norm requires p > 1");
  }
  double value(const VecN& xi) const override { return lp_value_impl(xi, p_); }
  VecN grad(const VecN& xi) const override { return lp_grad_impl(xi, p_); }
  MatN hess(const VecN& xi) const override { return lp_hess_impl(xi, p_); }
  double dual_value(const VecN& al) const override { return lp_value_impl(al, q_); }
  VecN dual_grad(const VecN& al) const override { return lp_grad_impl(al, q_); }
  MatN dual_hess(const VecN& al) const override { return lp_hess_impl(al, q_); }
  NormPtr reversed() const override { return std::make_shared<LpNorm>(dim_, p_); }
  void to_json(json& j) const override { j = json{{"variant", "lp"}, {"dim", dim_}, {"p", p_}}; }
  double p() const { return p_; }

 private:
  double p_, q_;
};

// two_slope_1d(a,b): F(xi) = a xi (xi >= 0), -b xi (xi < 0) ---------------

class TwoSlopeNorm final : public Norm {
 public:
  TwoSlopeNorm(double a, double b) : Norm(1), a_(a), b_(b) {
    if (!(a > 0.0) || !(b > 0.0)) throw invalid_norm_error("two_slope_1d requires a, b > 0");
  }
  double value(const VecN& xi) const override { return xi[0] >= 0 ? a_ * xi[0] : -b_ * xi[0]; }
  VecN grad(const VecN& xi) const override {
    VecN r(1);
    r[0] = xi[0] >= 0 ? a_ * a_ * xi[0] : b_ * b_ * xi[0];
    return r;
  }
  MatN hess(const VecN& xi) const override {
    if (xi[0] == 0.0 && a_ != b_) throw degenerate_point_error("two_slope hessian at zero");
    MatN g(1);
    g(0, 0) = xi[0] >= 0 ? a_ * a_ : b_ * b_;
    return g;
  }
  double dual_value(const VecN& al) const override { return al[0] >= 0 ? al[0] / a_ : -al[0] / b_; }
  VecN dual_grad(const VecN& al) const override {
    VecN r(1);
    r[0] = al[0] >= 0 ? al[0] / (a_ * a_) : al[0] / (b_ * b_);
    return r;
  }
  MatN dual_hess(const VecN& al) const override {
    if (al[0] == 0.0 && a_ != b_) throw degenerate_point_error("two_slope dual hessian at zero");
    MatN g(1);
    g(0, 0) = al[0] >= 0 ? 1.0 / (a_ * a_) : 1.0 / (b_ * b_);
    return g;
  }
  NormPtr reversed() const override { return std::make_shared<TwoSlopeNorm>(b_, a_); }
  void to_json(json& j) const override {
    j = json{{"variant", "two_slope_1d"}, {"dim", 1}, {"a", a_}, {"b", b_}};
  }

 private:
  double a_, b_;
};

// deformed(base, sigma): F(xi) = F0(sigma xi) -----------------------------

class DeformedNorm final : public Norm {
 public:
  DeformedNorm(NormPtr base, const MatN& sigma)
      : Norm(base->dim()), base_(std::move(base)), s_(sigma), sinv_(inverse(sigma)) {
    if (sigma.n != dim_) throw invalid_norm_error("deformed: sigma dim mismatch");
  }
  double value(const VecN& xi) const override { return base_->value(matvec(s_, xi)); }
  VecN grad(const VecN& xi) const override { return matTvec(s_, base_->grad(matvec(s_, xi))); }
  MatN hess(const VecN& xi) const override {
    return matmul(transpose(s_), matmul(base_->hess(matvec(s_, xi)), s_));
  }
  double dual_value(const VecN& al) const override { return base_->dual_value(matTvec(sinv_, al)); }
  VecN dual_grad(const VecN& al) const override {
    return matvec(sinv_, base_->dual_grad(matTvec(sinv_, al)));
  }
  MatN dual_hess(const VecN& al) const override {
    return matmul(sinv_, matmul(base_->dual_hess(matTvec(sinv_, al)), transpose(sinv_)));
  }
  NormPtr reversed() const override { return std::make_shared<DeformedNorm>(base_->reversed(), s_); }
  void to_json(json& j) const override {
    json bj;
    base_->to_json(bj);
    j = json{{"variant", "deformed"}, {"dim", dim_}, {"base", bj}, {"sigma", mat_to_json(s_)}};
  }

 private:
  NormPtr base_;
  MatN s_, sinv_;
};

// randers(A, beta): F(xi) = sqrt(xi.A.xi) + <beta, xi>, |beta|_{A^-1} < 1 --
//
// The classical nonsymmetric smooth strongly convex Minkowski norm.

class RandersNorm final : public Norm {
 public:
  RandersNorm(const MatN& a, const VecN& beta) : Norm(a.n), a_(a), b_(beta) {
    if (!is_spd(a)) throw invalid_norm_error("randers: A must be SPD");
    const double bn = dot(beta, matvec(inverse(a), beta));
    if (!(bn < 1.0)) throw invalid_norm_error("randers: requires |beta|_{A^-1} < 1");
  }
  double value(const VecN& xi) const override {
    return std::sqrt(std::max(0.0, dot(xi, matvec(a_, xi)))) + dot(b_, xi);
  }
  VecN grad(const VecN& xi) const override {
    if (near_zero(xi)) return VecN(dim_);
    const VecN axi = matvec(a_, xi);
    const double nv = std::sqrt(dot(xi, axi));
    const double f = nv + dot(b_, xi);
    return f * ((1.0 / nv) * axi + b_);
  }
  MatN hess(const VecN& xi) const override {
    if (near_zero(xi)) throw degenerate_point_error("randers hessian at zero vector");
    const VecN axi = matvec(a_, xi);
    const double nv = std::sqrt(dot(xi, axi));
    const double f = nv + dot(b_, xi);
    VecN dn = (1.0 / nv) * axi;            // grad of sqrt(xi.A.xi)
    VecN df = dn + b_;                     // grad of F
    MatN d2n = (1.0 / nv) * a_ + (-1.0 / (nv * nv * nv)) * outer(axi, axi);
    return outer(df, df) + f * d2n;
  }
  NormPtr reversed() const override { return std::make_shared<RandersNorm>(a_, -b_); }
  void to_json(json& j) const override {
    j = json{{"variant", "randers"}, {"dim", dim_}, {"a", mat_to_json(a_)}, {"beta", vec_to_json(b_)}};
  }

 private:
  MatN a_;
  VecN b_;
};

// Dual view: swaps the primal and dual roles of a norm --------------------

class DualNorm final : public Norm {
 public:
  explicit DualNorm(NormPtr base) : Norm(base->dim()), base_(std::move(base)) {}
  double value(const VecN& xi) const override { return base_->dual_value(xi); }
  VecN grad(const VecN& xi) const override { return base_->dual_grad(xi); }
  MatN hess(const VecN& xi) const override { return base_->dual_hess(xi); }
  double dual_value(const VecN& al) const override { return base_->value(al); }
  VecN dual_grad(const VecN& al) const override { return base_->grad(al); }
  MatN dual_hess(const VecN& al) const override { return base_->hess(al); }
  NormPtr reversed() const override { return std::make_shared<DualNorm>(base_->reversed()); }
  void to_json(json& j) const override {
    json bj;
    base_->to_json(bj);
    j = json{{"variant", "dual"}, {"dim", dim_}, {"base", bj}};
  }
  NormPtr base() const { return base_; }

 private:
  NormPtr base_;
};

// regularized ------------------------------------------------------------

namespace {

// g_[eps](xi) = (g + eps I)(I + eps g)^{-1}
MatN full_reg(const MatN& g, double eps) {
  const MatN id = MatN::identity(g.n);
  return matmul(g + eps * id, inverse(id + eps * g));
}

}  // namespace

// lower: F^2_[eps] = F^2 + eps |xi|^2 (exact derivatives).
class LowerRegNorm final : public Norm {
 public:
  LowerRegNorm(NormPtr base, double eps) : Norm(base->dim()), base_(std::move(base)), eps_(eps) {
    if (!(eps > 0.0)) throw invalid_norm_error("regularize: eps must be > 0");
  }
  double value(const VecN& xi) const override {
    const double f = base_->value(xi);
    return std::sqrt(f * f + eps_ * dot(xi, xi));
  }
  VecN grad(const VecN& xi) const override { return base_->grad(xi) + eps_ * xi; }
  MatN hess(const VecN& xi) const override {
    return base_->hess(xi) + eps_ * MatN::identity(dim_);
  }
  NormPtr reversed() const override { return std::make_shared<LowerRegNorm>(base_->reversed(), eps_); }
  void to_json(json& j) const override {
    json bj;
    base_->to_json(bj);
    j = json{{"variant", "regularized"}, {"dim", dim_}, {"base", bj}, {"eps", eps_}, {"mode", "lower"}};
  }
  NormPtr base() const { return base_; }
  double eps() const { return eps_; }

 private:
  NormPtr base_;
  double eps_;
};

// full: the norm sqrt(xi . g_[eps](xi) . xi); by convention its Legendre
// data is (g_[eps] xi, g_[eps]) and the dual data the matrix inverses at the
// matched point, so the NormEval invariants and the regularized duality
// g*_[eps](alpha) = g_[eps](J*(alpha))^{-1} hold exactly.
class FullRegNorm final : public Norm {
 public:
  FullRegNorm(NormPtr base, double eps) : Norm(base->dim()), base_(std::move(base)), eps_(eps) {
    if (!(eps > 0.0)) throw invalid_norm_error("regularize: eps must be > 0");
  }
  double value(const VecN& xi) const override {
    if (near_zero(xi)) return 0.0;
    return std::sqrt(std::max(0.0, dot(xi, matvec(hess(xi), xi))));
  }
  VecN grad(const VecN& xi) const override {
    if (near_zero(xi)) return VecN(dim_);
    return matvec(hess(xi), xi);
  }
  MatN hess(const VecN& xi) const override { return full_reg(base_->hess(xi), eps_); }
  double dual_value(const VecN& al) const override {
    if (near_zero(al)) return 0.0;
    return value(dual_grad(al));
  }
  VecN dual_grad(const VecN& al) const override { return dual_grad_newton(*this, al); }
  MatN dual_hess(const VecN& al) const override {
    if (near_zero(al)) throw degenerate_point_error("dual hessian at zero covector");
    return inverse(hess(dual_grad(al)));
  }
  NormPtr reversed() const override { return std::make_shared<FullRegNorm>(base_->reversed(), eps_); }
  void to_json(json& j) const override {
    json bj;
    base_->to_json(bj);
    j = json{{"variant", "regularized"}, {"dim", dim_}, {"base", bj}, {"eps", eps_}, {"mode", "full"}};
  }

 private:
  NormPtr base_;
  double eps_;
};

// Factories ---------------------------------------------------------------

NormPtr make_quadratic(const MatN& a) { return std::make_shared<QuadraticNorm>(a); }
NormPtr make_lp(int dim, double p) { return std::make_shared<LpNorm>(dim, p); }
NormPtr make_two_slope(double a, double b) { return std::make_shared<TwoSlopeNorm>(a, b); }
NormPtr make_deformed(NormPtr base, const MatN& sigma) {
  return std::make_shared<DeformedNorm>(std::move(base), sigma);
}
NormPtr make_randers(const MatN& a, const VecN& beta) {
  return std::make_shared<RandersNorm>(a, beta);
}

NormPtr regularize(NormPtr base, double eps, RegMode mode) {
  if (!(eps > 0.0)) throw invalid_norm_error("regularize: eps must be > 0");
  switch (mode) {
    case RegMode::lower:
      return std::make_shared<LowerRegNorm>(std::move(base), eps);
    case RegMode::upper:
      // upper regularization = dual of the lower regularization of the dual
      return std::make_shared<DualNorm>(
          std::make_shared<LowerRegNorm>(std::make_shared<DualNorm>(std::move(base)), eps));
    case RegMode::full:
      return std::make_shared<FullRegNorm>(std::move(base), eps);
  }
  throw invalid_norm_error("regularize: unknown mode");
}

NormPtr reverse(NormPtr n) { return n->reversed(); }

NormEval eval(const Norm& n, const VecN& xi, bool want_hessian) {
  if (xi.n != n.dim()) throw invalid_norm_error("eval: dimension mismatch");
  NormEval e;
  e.value = n.value(xi);
  e.covector = n.grad(xi);
  if (want_hessian) {
    if (near_zero(xi)) throw degenerate_point_error("hessian requested at zero vector");
    e.hessian = n.hess(xi);
    e.has_hessian = true;
  }
  return e;
}

NormEval dual_eval(const Norm& n, const VecN& alpha, bool want_hessian) {
  if (alpha.n != n.dim()) throw invalid_norm_error("dual_eval: dimension mismatch");
  NormEval e;
  e.value = n.dual_value(alpha);
  e.covector = n.dual_grad(alpha);
  if (want_hessian) {
    if (near_zero(alpha)) throw degenerate_point_error("dual hessian requested at zero covector");
    e.hessian = n.dual_hess(alpha);
    e.has_hessian = true;
  }
  return e;
}

// Serialization ------------------------------------------------------------

nlohmann::json norm_to_json(const Norm& n) {
  json j;
  n.to_json(j);
  return j;
}

NormPtr norm_from_json(const json& j) {
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "quadratic") return make_quadratic(mat_from_json(j.at("a")));
  if (variant == "lp") return make_lp(j.at("dim").get<int>(), j.at("p").get<double>());
  if (variant == "two_slope_1d")
    return make_two_slope(j.at("a").get<double>(), j.at("b").get<double>());
  if (variant == "deformed")
    return make_deformed(norm_from_json(j.at("base")), mat_from_json(j.at("sigma")));
  if (variant == "randers")
    return make_randers(mat_from_json(j.at("a")), vec_from_json(j.at("beta")));
  if (variant == "regularized") {
    const std::string mode = j.at("mode").get<std::string>();
    RegMode m = mode == "lower"   ? RegMode::lower
                : mode == "upper" ? RegMode::upper
                : mode == "full"  ? RegMode::full
                                  : throw invalid_norm_error("unknown regularization mode: " + mode);
    return regularize(norm_from_json(j.at("base")), j.at("eps").get<double>(), m);
  }
  if (variant == "dual") return std::make_shared<DualNorm>(norm_from_json(j.at("base")));
  throw invalid_norm_error("unknown norm variant: " + variant);
}

// Convexity constants --------------------------------------------------------

namespace {

// Kronecker low-discrepancy sequence mapped to the unit sphere.
struct SphereSampler {
  int n;
  std::uint64_t seed;
  double off1, off2;
  explicit SphereSampler(int dim, std::uint64_t s) : n(dim), seed(s) {
    // splitmix64 for the sequence offsets
    auto mix = [](std::uint64_t& z) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t x = z;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      return x ^ (x >> 31);
    };
    std::uint64_t st = s;
    off1 = static_cast<double>(mix(st) >> 11) / 9007199254740992.0;
    off2 = static_cast<double>(mix(st) >> 11) / 9007199254740992.0;
  }
  VecN at(int k) const {
    VecN r(n);
    if (n == 1) {
      r[0] = (k % 2 == 0) ? 1.0 : -1.0;
      return r;
    }
    const double g1 = 0.6180339887498949;   // 1/phi
    const double g2 = 0.7548776662466927;   // plastic number recurrences
    const double g3 = 0.5698402909980532;
    if (n == 2) {
      const double th = 2.0 * M_PI * std::fmod(off1 + k * g1, 1.0);
      r[0] = std::cos(th);
      r[1] = std::sin(th);
    } else {
      const double u = std::fmod(off1 + k * g2, 1.0);
      const double v = std::fmod(off2 + k * g3, 1.0);
      const double z = 2.0 * u - 1.0;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double th = 2.0 * M_PI * v;
      r[0] = rho * std::cos(th);
      r[1] = rho * std::sin(th);
      r[2] = z;
    }
    return r;
  }
};

double rayleigh_ratio(const Norm& n, const VecN& xi, const VecN& eta) {
  const double f2 = n.value(eta);
  if (!(f2 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  MatN g;
  try {
    g = n.hess(xi);
  } catch (const degenerate_point_error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = dot(eta, matvec(g, eta));
  return q / (f2 * f2);
}

VecN renormalize(const VecN& x) {
  const double nn = norm2(x);
  if (nn < 1e-300) return x;
  return (1.0 / nn) * x;
}

// Derivative-free compass polish of the ratio over the sphere-pair.
template <typename F>
void polish(const F& f, VecN& xi, VecN& eta, bool maximize, int iters) {
  double best = f(xi, eta);
  if (!std::isfinite(best)) return;
  double step = 0.3;
  const int n = xi.n;
  for (int it = 0; it < iters && step > 1e-9; ++it) {
    bool improved = false;
    for (int which = 0; which < 2; ++which) {
      VecN& x = (which == 0) ? xi : eta;
      for (int d = 0; d < n; ++d) {
        for (double s : {step, -step}) {
          VecN trial = x;
          trial[d] += s;
          trial = renormalize(trial);
          VecN a = (which == 0) ? trial : xi;
          VecN b = (which == 0) ? eta : trial;
          const double v = f(a, b);
          if (std::isfinite(v) && ((maximize && v > best) || (!maximize && v < best))) {
            best = v;
            x = trial;
            improved = true;
          }
        }
      }
    }
    if (!improved) step *= 0.5;
  }
}

}  // namespace

ConvexityConstants convexity_constants(const Norm& n, int sample_budget, std::uint64_t seed) {
  if (sample_budget < 1) throw std::invalid_argument("convexity_constants: sample_budget >= 1");
  ConvexityConstants cc;
  cc.sample_budget = sample_budget;
  cc.seed = seed;

  SphereSampler sx(n.dim(), seed), se(n.dim(), seed ^ 0x5bf0a8b1ULL);
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = 0.0;
  VecN xi_min, eta_min, xi_max, eta_max;
  double eig_lo = std::numeric_limits<double>::infinity();
  double eig_hi = 0.0;
  double f_lo = std::numeric_limits<double>::infinity();
  double f_hi = 0.0;

  for (int k = 0; k < sample_budget; ++k) {
    const VecN xi = sx.at(k);
    const VecN eta = se.at(k * 7 + 3);
    const double r = rayleigh_ratio(n, xi, eta);
    if (std::isfinite(r)) {
      if (r < rmin) {
        rmin = r;
        xi_min = xi;
        eta_min = eta;
      }
      if (r > rmax) {
        rmax = r;
        xi_max = xi;
        eta_max = eta;
      }
    }
    try {
      MatN g = n.hess(xi);
      bool fin = true;
      for (int i = 0; i < g.n && fin; ++i)
        for (int j = 0; j < g.n && fin; ++j) fin = std::isfinite(g(i, j));
      if (fin) {
        double lo, hi;
        sym_eig_range(g, &lo, &hi);
        eig_lo = std::min(eig_lo, lo);
        eig_hi = std::max(eig_hi, hi);
      } else {
        eig_hi = std::numeric_limits<double>::infinity();
      }
    } catch (const degenerate_point_error&) {
    }
    const double fv = n.value(xi);
    f_lo = std::min(f_lo, fv);
    f_hi = std::max(f_hi, fv);
  }

  auto ratio = [&](const VecN& a, const VecN& b) { return rayleigh_ratio(n, a, b); };
  if (xi_min.n > 0) polish(ratio, xi_min, eta_min, /*maximize=*/false, 400);
  if (xi_max.n > 0) polish(ratio, xi_max, eta_max, /*maximize=*/true, 400);
  if (xi_min.n > 0) rmin = std::min(rmin, rayleigh_ratio(n, xi_min, eta_min));
  if (xi_max.n > 0) rmax = std::max(rmax, rayleigh_ratio(n, xi_max, eta_max));

  // Zoom probe: drive xi toward each coordinate hyperplane (the hessian
  // degeneracy set of lp-type norms) and track the ratio and eigenvalue
  // extremes along the way.  Sampling alone cannot distinguish a large
  // finite sup from a blow-up.
  if (n.dim() >= 2) {
    for (const VecN* etap : {&eta_min, &eta_max}) {
      if (etap->n == 0) continue;
      for (int d = 0; d < n.dim(); ++d) {
        VecN xi = (xi_max.n > 0) ? xi_max : sx.at(0);
        for (int z = 0; z < 80; ++z) {
          xi[d] *= 0.5;
          VecN xz = renormalize(xi);
          if (norm_inf(xz) < 1e-300) break;
          const double r = rayleigh_ratio(n, xz, *etap);
          if (std::isfinite(r)) {
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
          }
          try {
            MatN g = n.hess(xz);
            bool fin = true;
            for (int i = 0; i < g.n && fin; ++i)
              for (int j = 0; j < g.n && fin; ++j) fin = std::isfinite(g(i, j));
            double lo, hi;
            if (fin) {
              sym_eig_range(g, &lo, &hi);
              eig_lo = std::min(eig_lo, lo);
              eig_hi = std::max(eig_hi, hi);
            } else {
              eig_hi = std::numeric_limits<double>::infinity();
            }
          } catch (const degenerate_point_error&) {
          }
          if (rmax > 1e9 && rmin < 1e-9) break;
        }
      }
    }
  }

  constexpr double kDegLow = 1e-7;
  constexpr double kDegHigh = 1e7;

  cc.kappa_star = std::min(1.0, rmin);
  cc.kappa_star_degenerate = !(rmin > kDegLow);
  if (cc.kappa_star_degenerate) cc.kappa_star = 0.0;

  cc.kappa = (rmax > 0) ? std::min(1.0, 1.0 / rmax) : 0.0;
  cc.kappa_degenerate = !(rmax < kDegHigh);
  if (cc.kappa_degenerate) cc.kappa = 0.0;

  // (1.2)-type eigenvalue bounds of g; (1.3) bounds of F^2 against |.|^2 are
  // implied and also folded in so the reported lambdas certify both.
  eig_lo = std::min(eig_lo, f_lo * f_lo);
  eig_hi = std::max(eig_hi, f_hi * f_hi);
  cc.lambda_star = eig_lo;
  cc.lambda_star_degenerate = !(eig_lo > kDegLow);
  if (cc.lambda_star_degenerate) cc.lambda_star = 0.0;
  cc.lambda = (eig_hi > 0) ? 1.0 / eig_hi : 0.0;
  cc.lambda_degenerate = !(eig_hi < kDegHigh);
  if (cc.lambda_degenerate) cc.lambda = 0.0;
  return cc;
}

}  // namespace finsler
