#pragma once

#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <stdexcept>
#include <string>

#include "finsler/linalg.hpp"

namespace finsler {

// Errors ---------------------------------------------------------------

struct invalid_norm_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct degenerate_point_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Minkowski norm at a single tangent space ------------------------------
//
// A norm F is positively 1-homogeneous, positive off 0 and subadditive,
// but not necessarily symmetric under xi -> -xi.  grad() is the Legendre
// map J = D(F^2/2) and hess() the matrix g(xi) = D^2(F^2/2); the dual_*
// methods expose the dual norm F*, the transfer map J* (inverse of J) and
// the dual Hessian g*(alpha) = g(J*(alpha))^{-1}.

class Norm {
 public:
  virtual ~Norm() = default;

  int dim() const { return dim_; }

  virtual double value(const VecN& xi) const = 0;
  virtual VecN grad(const VecN& xi) const = 0;   // J(xi); J(0) = 0
  virtual MatN hess(const VecN& xi) const = 0;   // g(xi); xi != 0

  virtual double dual_value(const VecN& alpha) const;
  virtual VecN dual_grad(const VecN& alpha) const;  // J*(alpha)
  virtual MatN dual_hess(const VecN& alpha) const;  // g*(alpha)

  virtual std::shared_ptr<const Norm> reversed() const = 0;
  virtual void to_json(nlohmann::json& j) const = 0;

 protected:
  explicit Norm(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) throw invalid_norm_error("norm dim must be 1..3");
  }
  int dim_;
};

using NormPtr = std::shared_ptr<const Norm>;

enum class RegMode { lower, upper, full };

NormPtr make_quadratic(const MatN& a);
NormPtr make_lp(int dim, double p);
NormPtr make_two_slope(double a, double b);
NormPtr make_deformed(NormPtr base, const MatN& sigma);
NormPtr make_randers(const MatN& a, const VecN& beta);

// eps-regularizations of a Minkowski norm.  lower: g + eps*Id on the primal
// Hessian; upper: the dual construction; full: g_[eps] = (g + eps)(1 + eps g)^{-1},
// uniformly elliptic from both sides.
NormPtr regularize(NormPtr base, double eps, RegMode mode);

// Reverse structure F(x, -xi); reverse(reverse(n)) reproduces n structurally.
NormPtr reverse(NormPtr n);

NormPtr norm_from_json(const nlohmann::json& j);
nlohmann::json norm_to_json(const Norm& n);

// Spec-level evaluation bundle ------------------------------------------

struct NormEval {
  double value = 0.0;
  VecN covector;  // J(xi) for eval, J*(alpha) for dual_eval
  MatN hessian;   // g(xi) resp. g*(alpha)
  bool has_hessian = false;
};

NormEval eval(const Norm& n, const VecN& xi, bool want_hessian = true);
NormEval dual_eval(const Norm& n, const VecN& alpha, bool want_hessian = true);

inline VecN legendre(const Norm& n, const VecN& xi) { return n.grad(xi); }
inline VecN legendre_inv(const Norm& n, const VecN& alpha) { return n.dual_grad(alpha); }

// Sampled 2-uniform convexity/smoothness constants -----------------------
//
// kappa_star and kappa are the sampled extremes of the Rayleigh ratio
// eta.g(xi).eta / F^2(eta); lambda_star, lambda come from eigenvalue
// extremes of g(xi).  Estimates never undershoot the true infima; a local
// polish pass drives them to the attained extremes.  Norms that are not
// uniformly elliptic get a degeneracy flag instead of an error.

struct ConvexityConstants {
  double kappa = 1.0;
  double kappa_star = 1.0;
  double lambda = 1.0;
  double lambda_star = 1.0;
  bool kappa_degenerate = false;
  bool kappa_star_degenerate = false;
  bool lambda_degenerate = false;
  bool lambda_star_degenerate = false;
  int sample_budget = 0;
  std::uint64_t seed = 0;
};

ConvexityConstants convexity_constants(const Norm& n, int sample_budget, std::uint64_t seed);

// Damped (quasi-)Newton solve of J(xi) = alpha for norms without a closed
// form dual; tolerance 1e-12 on the residual relative to |alpha|.
VecN dual_grad_newton(const Norm& n, const VecN& alpha);

}  // namespace finsler
