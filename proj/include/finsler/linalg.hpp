#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace finsler {

// Dense vectors/matrices for tangent-space dimensions n <= 3.
inline constexpr int kMaxDim = 3;

struct VecN {
  int n = 0;
  std::array<double, kMaxDim> v{0.0, 0.0, 0.0};

  VecN() = default;
  explicit VecN(int dim) : n(dim) {}
  VecN(std::initializer_list<double> xs) {
    n = static_cast<int>(xs.size());
    int i = 0;
    for (double x : xs) v[i++] = x;
  }
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
};

struct MatN {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim> a{};  // row-major

  MatN() = default;
  explicit MatN(int dim) : n(dim) { a.fill(0.0); }
  double& operator()(int i, int j) { return a[i * kMaxDim + j]; }
  double operator()(int i, int j) const { return a[i * kMaxDim + j]; }

  static MatN identity(int dim) {
    MatN m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline VecN operator+(const VecN& x, const VecN& y) {
  VecN r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i] + y[i];
  return r;
}
inline VecN operator-(const VecN& x, const VecN& y) {
  VecN r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i] - y[i];
  return r;
}
inline VecN operator*(double c, const VecN& x) {
  VecN r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = c * x[i];
  return r;
}
inline VecN operator-(const VecN& x) { return -1.0 * x; }

inline double dot(const VecN& x, const VecN& y) {
  double s = 0.0;
  for (int i = 0; i < x.n; ++i) s += x[i] * y[i];
  return s;
}
inline double norm2(const VecN& x) { return std::sqrt(dot(x, x)); }
inline double norm_inf(const VecN& x) {
  double s = 0.0;
  for (int i = 0; i < x.n; ++i) s = std::max(s, std::abs(x[i]));
  return s;
}

inline VecN matvec(const MatN& m, const VecN& x) {
  VecN r(m.n);
  for (int i = 0; i < m.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.n; ++j) s += m(i, j) * x[j];
    r[i] = s;
  }
  return r;
}
inline VecN matTvec(const MatN& m, const VecN& x) {
  VecN r(m.n);
  for (int j = 0; j < m.n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.n; ++i) s += m(i, j) * x[i];
    r[j] = s;
  }
  return r;
}
inline MatN matmul(const MatN& a, const MatN& b) {
  MatN r(a.n);
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.n; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}
inline MatN operator+(const MatN& a, const MatN& b) {
  MatN r(a.n);
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) r(i, j) = a(i, j) + b(i, j);
  return r;
}
inline MatN operator*(double c, const MatN& a) {
  MatN r(a.n);
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) r(i, j) = c * a(i, j);
  return r;
}
inline MatN transpose(const MatN& m) {
  MatN r(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) r(i, j) = m(j, i);
  return r;
}
inline MatN outer(const VecN& x, const VecN& y) {
  MatN r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) = x[i] * y[j];
  return r;
}

inline double det(const MatN& m) {
  switch (m.n) {
    case 1:
      return m(0, 0);
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default:
      throw std::invalid_argument("det: dim must be 1..3");
  }
}

inline MatN inverse(const MatN& m) {
  const double d = det(m);
  if (d == 0.0 || !std::isfinite(d)) throw std::runtime_error("inverse: singular matrix");
  MatN r(m.n);
  switch (m.n) {
    case 1:
      r(0, 0) = 1.0 / d;
      break;
    case 2:
      r(0, 0) = m(1, 1) / d;
      r(0, 1) = -m(0, 1) / d;
      r(1, 0) = -m(1, 0) / d;
      r(1, 1) = m(0, 0) / d;
      break;
    case 3: {
      r(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / d;
      r(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / d;
      r(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / d;
      r(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / d;
      r(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / d;
      r(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / d;
      r(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / d;
      r(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / d;
      r(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / d;
      break;
    }
    default:
      throw std::invalid_argument("inverse: dim must be 1..3");
  }
  return r;
}

inline VecN solve(const MatN& m, const VecN& b) { return matvec(inverse(m), b); }

// Eigenvalue range of a symmetric matrix (cyclic Jacobi; n <= 3).
inline void sym_eig_range(const MatN& m, double* lo, double* hi) {
  MatN a = m;
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < a.n; ++i)
      for (int j = i + 1; j < a.n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (int p = 0; p < a.n; ++p)
      for (int q = p + 1; q < a.n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < a.n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < a.n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  *lo = a(0, 0);
  *hi = a(0, 0);
  for (int i = 1; i < a.n; ++i) {
    *lo = std::min(*lo, a(i, i));
    *hi = std::max(*hi, a(i, i));
  }
}

inline bool is_spd(const MatN& m) {
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j)
      if (!std::isfinite(m(i, j)) || std::abs(m(i, j) - m(j, i)) > 1e-12 * (1.0 + std::abs(m(i, j))))
        return false;
  double lo, hi;
  sym_eig_range(m, &lo, &hi);
  return lo > 0.0;
}

}  // namespace finsler
