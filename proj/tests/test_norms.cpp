#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "finsler/norms.hpp"

using namespace finsler;

namespace {

MatN mat2(double a, double b, double c, double d) {
  MatN m(2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

VecN vec2(double x, double y) { return VecN{x, y}; }

VecN random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VecN v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// central finite-difference Hessian of F^2/2, the test-side oracle
MatN fd_hessian(const Norm& n, const VecN& xi, double h = 1e-5) {
  MatN g(xi.n);
  auto f = [&](const VecN& x) {
    const double v = n.value(x);
    return 0.5 * v * v;
  };
  for (int i = 0; i < xi.n; ++i)
    for (int j = 0; j < xi.n; ++j) {
      VecN xpp = xi, xpm = xi, xmp = xi, xmm = xi;
      xpp[i] += h;
      xpp[j] += h;
      xpm[i] += h;
      xpm[j] -= h;
      xmp[i] -= h;
      xmp[j] += h;
      xmm[i] -= h;
      xmm[j] -= h;
      g(i, j) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h);
    }
  return g;
}

// numeric maximizer of alpha.xi - F^2(xi)/2 over a coarse sphere scan plus
// refinement; independent oracle for the Legendre transfer map
VecN legendre_inv_oracle_2d(const Norm& n, const VecN& alpha) {
  double best = -1e300;
  VecN arg(2);
  for (int k = 0; k < 20000; ++k) {
    const double th = 2.0 * M_PI * k / 20000.0;
    VecN dir = vec2(std::cos(th), std::sin(th));
    // optimal radius along dir: maximize r a.dir - r^2 F(dir)^2/2
    const double ad = dot(alpha, dir);
    const double f = n.value(dir);
    if (ad <= 0) continue;
    const double r = ad / (f * f);
    const double val = r * ad - 0.5 * r * r * f * f;
    if (val > best) {
      best = val;
      arg = r * dir;
    }
  }
  return arg;
}

}  // namespace

TEST_CASE("euclidean value") {
  auto n = make_lp(2, 2.0);
  CHECK(n->value(vec2(3, 4)) == doctest::Approx(5.0));
}

TEST_CASE("quadratic: hessian constant, covector A xi, dual inverse") {
  MatN A = mat2(2.0, 0.5, 0.5, 3.0);
  auto n = make_quadratic(A);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const VecN xi = random_vec(rng, 2, 2.0);
    const NormEval e = eval(*n, xi);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(e.hessian(i, j) == doctest::Approx(A(i, j)));
    const VecN axi = matvec(A, xi);
    for (int i = 0; i < 2; ++i) CHECK(e.covector[i] == doctest::Approx(axi[i]));
    // J*(alpha) = A^{-1} alpha
    const VecN back = n->dual_grad(e.covector);
    for (int i = 0; i < 2; ++i) CHECK(back[i] == doctest::Approx(xi[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_quadratic(mat2(1.0, 2.0, 2.0, 1.0)), invalid_norm_error);
}

TEST_CASE("quadratic diag legendre example") {
  auto n = make_quadratic(mat2(2.0, 0.0, 0.0, 3.0));
  const VecN j = legendre(*n, vec2(1, 1));
  CHECK(j[0] == doctest::Approx(2.0));
  CHECK(j[1] == doctest::Approx(3.0));
}

TEST_CASE("lp(4) value and covector at (1,1)") {
  auto n = make_lp(2, 4.0);
  const VecN xi = vec2(1, 1);
  const NormEval e = eval(*n, xi);
  CHECK(e.value == doctest::Approx(std::pow(2.0, 0.25)));
  // J = |xi|_p^{2-p} |xi_i|^{p-2} xi_i = 2^{-1/2} (1,1)
  CHECK(e.covector[0] == doctest::Approx(std::pow(2.0, -0.5)));
  CHECK(e.covector[1] == doctest::Approx(std::pow(2.0, -0.5)));
}

TEST_CASE("lp hessian matches finite differences") {
  std::mt19937_64 rng(11);
  for (double p : {1.5, 3.0, 4.0}) {
    auto n = make_lp(2, p);
    for (int t = 0; t < 100; ++t) {
      VecN xi = random_vec(rng, 2, 2.0);
      if (std::abs(xi[0]) < 0.05 || std::abs(xi[1]) < 0.05 || norm2(xi) < 0.3) continue;
      const MatN g = n->hess(xi);
      const MatN g0 = fd_hessian(*n, xi);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          CHECK(g(i, j) == doctest::Approx(g0(i, j)).epsilon(1e-5));
    }
  }
}

TEST_CASE("lp dual is the conjugate exponent norm") {
  auto n = make_lp(2, 4.0);
  CHECK(n->dual_value(vec2(1, 0)) == doctest::Approx(1.0));  // ||alpha||_{4/3}
  CHECK(n->dual_value(vec2(1, 1)) == doctest::Approx(std::pow(2.0, 0.75)));
}

TEST_CASE("legendre at zero is zero") {
  for (auto n : {make_lp(2, 3.0), make_quadratic(mat2(2, 0, 0, 1)),
                 make_randers(MatN::identity(2), vec2(0.3, 0.1))}) {
    const VecN z = legendre(*n, VecN(2));
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
    const VecN zz = legendre_inv(*n, VecN(2));
    CHECK(zz[0] == 0.0);
    CHECK(zz[1] == 0.0);
  }
}

TEST_CASE("lp(3) legendre round trip vs oracle") {
  auto n = make_lp(2, 3.0);
  const VecN xi = vec2(1.0, -2.0);
  const VecN al = legendre(*n, xi);
  const VecN back = legendre_inv(*n, al);
  CHECK(back[0] == doctest::Approx(xi[0]).epsilon(1e-12));
  CHECK(back[1] == doctest::Approx(xi[1]).epsilon(1e-12));
  // independent oracle: the variational characterization
  const VecN oracle = legendre_inv_oracle_2d(*n, al);
  CHECK(oracle[0] == doctest::Approx(xi[0]).epsilon(2e-3));
  CHECK(oracle[1] == doctest::Approx(xi[1]).epsilon(2e-3));
}

TEST_CASE("duality round trip across variants") {
  std::mt19937_64 rng(23);
  std::vector<NormPtr> norms = {
      make_lp(2, 4.0),
      make_lp(3, 1.5),
      make_quadratic(mat2(2.0, 0.4, 0.4, 1.0)),
      make_two_slope(1.0, 2.0),
      make_deformed(make_lp(2, 3.0), mat2(1.0, 0.3, 0.0, 0.8)),
      make_randers(MatN::identity(2), vec2(0.3, 0.2)),
      regularize(make_lp(2, 4.0), 0.1, RegMode::lower),
      regularize(make_lp(2, 4.0), 0.1, RegMode::upper),
      regularize(make_lp(2, 1.5), 0.1, RegMode::full),
  };
  for (const auto& n : norms) {
    for (int t = 0; t < 60; ++t) {
      const VecN xi = random_vec(rng, n->dim(), 3.0);
      if (norm2(xi) < 1e-3) continue;
      const VecN al = n->grad(xi);
      CHECK(n->dual_value(al) == doctest::Approx(n->value(xi)).epsilon(1e-10));
      const VecN back = n->dual_grad(al);
      for (int i = 0; i < n->dim(); ++i)
        CHECK(back[i] == doctest::Approx(xi[i]).epsilon(1e-9).scale(norm2(xi)));
    }
  }
}

TEST_CASE("dual hessian is the inverse at the transferred point") {
  std::mt19937_64 rng(5);
  auto n = make_deformed(make_lp(2, 4.0), mat2(1.0, 0.2, -0.1, 0.9));
  for (int t = 0; t < 20; ++t) {
    VecN al = random_vec(rng, 2, 2.0);
    if (std::abs(al[0]) < 0.1 || std::abs(al[1]) < 0.1) continue;
    const MatN gs = n->dual_hess(al);
    const MatN g = n->hess(n->dual_grad(al));
    const MatN prod = matmul(gs, g);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(prod(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-7));
  }
}

TEST_CASE("monotonicity of the legendre map (1.8)") {
  std::mt19937_64 rng(31);
  auto n = make_lp(2, 1.5);
  const auto cc = convexity_constants(*n, 2000, 3);
  for (int t = 0; t < 200; ++t) {
    const VecN xi = random_vec(rng, 2, 2.0);
    const VecN eta = random_vec(rng, 2, 2.0);
    const VecN d = eta - xi;
    const double f = n->value(d);
    const double lhs = dot(n->grad(eta) - n->grad(xi), d);
    CHECK(lhs >= cc.kappa_star * f * f - 1e-9);
  }
}

TEST_CASE("two-point inequalities (1.5) with sampled constants") {
  std::mt19937_64 rng(37);
  for (auto pr : {std::pair<double, bool>{1.5, true}, {3.0, false}}) {
    auto n = make_lp(2, pr.first);
    const auto cc = convexity_constants(*n, 2000, 3);
    for (int t = 0; t < 300; ++t) {
      const VecN xi = random_vec(rng, 2, 2.0);
      const VecN eta = random_vec(rng, 2, 2.0);
      const double fm = n->value(0.5 * (xi + eta));
      const double fx = n->value(xi), fe = n->value(eta), fd = n->value(eta - xi);
      if (!cc.kappa_star_degenerate)
        CHECK(fm * fm <= 0.5 * fx * fx + 0.5 * fe * fe - 0.25 * cc.kappa_star * fd * fd + 1e-9);
      if (!cc.kappa_degenerate)
        CHECK(fm * fm >= 0.5 * fx * fx + 0.5 * fe * fe - 0.25 / cc.kappa * fd * fd - 1e-9);
    }
  }
}

TEST_CASE("dual symmetry of constants (lemma (v))") {
  // kappa*(F*) ~ kappa(F) and vice versa, sampled via the dual-view norm
  auto n = make_lp(2, 3.0);
  const auto cc = convexity_constants(*n, 3000, 17);
  auto dual_view = norm_from_json(nlohmann::json{
      {"variant", "dual"}, {"dim", 2}, {"base", norm_to_json(*n)}});
  const auto cd = convexity_constants(*dual_view, 3000, 17);
  CHECK(cd.kappa_star == doctest::Approx(cc.kappa).epsilon(0.05));
  CHECK(cd.kappa_degenerate == cc.kappa_star_degenerate);
}

TEST_CASE("eq (1.3): lambda bounds vs F^2") {
  std::mt19937_64 rng(101);
  auto n = make_deformed(make_lp(2, 1.5), mat2(1.2, 0.1, 0.0, 0.7));
  const auto cc = convexity_constants(*n, 2000, 9);
  for (int t = 0; t < 200; ++t) {
    const VecN eta = random_vec(rng, 2, 2.0);
    const double f2 = n->value(eta) * n->value(eta);
    const double e2 = dot(eta, eta);
    if (!cc.lambda_star_degenerate) CHECK(f2 >= cc.lambda_star * e2 - 1e-9);
    if (!cc.lambda_degenerate) CHECK(f2 <= e2 / cc.lambda + 1e-9);
  }
}

TEST_CASE("convexity constants: quadratic is hilbert") {
  auto n = make_quadratic(mat2(2.0, 0.3, 0.3, 1.0));
  const auto cc = convexity_constants(*n, 500, 1);
  CHECK(cc.kappa == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cc.kappa_star == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(cc.kappa_degenerate);
  CHECK_FALSE(cc.kappa_star_degenerate);
}

TEST_CASE("convexity constants: lp(1.5) and lp(3)") {
  const auto c15 = convexity_constants(*make_lp(2, 1.5), 4000, 42);
  CHECK(c15.kappa_star == doctest::Approx(0.5).epsilon(0.04));
  CHECK(c15.kappa_degenerate);
  CHECK(c15.lambda_degenerate);

  const auto c3 = convexity_constants(*make_lp(2, 3.0), 4000, 42);
  CHECK(c3.kappa == doctest::Approx(0.5).epsilon(0.04));
  CHECK(c3.kappa_star_degenerate);
  CHECK(c3.lambda_star_degenerate);
}

TEST_CASE("regularized full: identity fixed point and ellipticity") {
  auto q = make_quadratic(MatN::identity(2));
  auto r = regularize(q, 0.7, RegMode::full);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const VecN xi = random_vec(rng, 2, 2.0);
    if (norm2(xi) < 0.1) continue;
    const MatN g = r->hess(xi);
    CHECK(g(0, 0) == doctest::Approx(1.0));
    CHECK(g(1, 1) == doctest::Approx(1.0));
    CHECK(g(0, 1) == doctest::Approx(0.0));
  }

  auto reg = regularize(make_lp(2, 1.5), 0.1, RegMode::full);
  const auto cc = convexity_constants(*reg, 2000, 5);
  CHECK(cc.kappa_star > 0.05);
  CHECK(cc.kappa > 0.01);
  CHECK_FALSE(cc.kappa_degenerate);
  CHECK_FALSE(cc.kappa_star_degenerate);
  // quadratic-form lower bound g >= eps
  for (int t = 0; t < 10; ++t) {
    const VecN xi = random_vec(rng, 2, 2.0);
    if (norm2(xi) < 0.1) continue;
    double lo, hi;
    sym_eig_range(reg->hess(xi), &lo, &hi);
    CHECK(lo >= 0.1 - 1e-12);
  }
}

TEST_CASE("regularized: eps -> 0 converges pointwise") {
  auto base = make_lp(2, 4.0);
  const VecN xi = vec2(0.7, -1.3);
  const double v0 = base->value(xi);
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double v = regularize(base, eps, RegMode::lower)->value(xi);
    CHECK(std::abs(v - v0) < prev);
    prev = std::abs(v - v0);
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("regularize rejects nonpositive eps") {
  CHECK_THROWS_AS(regularize(make_lp(2, 4.0), 0.0, RegMode::full), invalid_norm_error);
  CHECK_THROWS_AS(regularize(make_lp(2, 4.0), -1.0, RegMode::lower), invalid_norm_error);
}

TEST_CASE("reverse: two-slope flips, reversible norms unchanged") {
  auto ts = make_two_slope(1.0, 2.0);
  auto rts = reverse(ts);
  VecN e(1);
  e[0] = 1.0;
  CHECK(rts->value(e) == doctest::Approx(2.0));
  e[0] = -1.0;
  CHECK(rts->value(e) == doctest::Approx(1.0));

  std::mt19937_64 rng(13);
  auto lp = make_lp(2, 4.0);
  auto rlp = reverse(lp);
  for (int t = 0; t < 50; ++t) {
    const VecN xi = random_vec(rng, 2, 2.0);
    CHECK(rlp->value(xi) == doctest::Approx(lp->value(xi)));
  }
  // reverse(reverse(n)) == n structurally
  auto rr = reverse(reverse(make_randers(MatN::identity(2), vec2(0.2, -0.1))));
  CHECK(norm_to_json(*rr) ==
        norm_to_json(*make_randers(MatN::identity(2), vec2(0.2, -0.1))));
}

TEST_CASE("reverse: F(xi) of the reverse equals F(-xi)") {
  std::mt19937_64 rng(17);
  auto n = make_randers(mat2(1.5, 0.2, 0.2, 1.0), vec2(0.25, -0.1));
  auto r = reverse(n);
  for (int t = 0; t < 50; ++t) {
    const VecN xi = random_vec(rng, 2, 2.0);
    CHECK(r->value(xi) == doctest::Approx(n->value(-xi)));
  }
}

TEST_CASE("eval errors") {
  auto n = make_lp(2, 4.0);
  CHECK_THROWS_AS(eval(*n, VecN(2), true), degenerate_point_error);
  CHECK_NOTHROW(eval(*n, VecN(2), false));
}

TEST_CASE("norm json round trip") {
  std::vector<NormPtr> norms = {
      make_lp(2, 4.0),
      make_quadratic(mat2(2.0, 0.4, 0.4, 1.0)),
      make_two_slope(1.0, 2.0),
      make_deformed(make_lp(2, 3.0), mat2(1.0, 0.3, 0.0, 0.8)),
      make_randers(MatN::identity(2), vec2(0.3, 0.2)),
      regularize(make_lp(2, 4.0), 0.05, RegMode::full),
  };
  std::mt19937_64 rng(29);
  for (const auto& n : norms) {
    auto m = norm_from_json(norm_to_json(*n));
    for (int t = 0; t < 10; ++t) {
      const VecN xi = random_vec(rng, n->dim(), 2.0);
      CHECK(m->value(xi) == doctest::Approx(n->value(xi)));
    }
  }
}
