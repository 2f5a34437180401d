#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "finsler/norms.hpp"

namespace finsler {

enum class Boundary { dirichlet_zero, periodic };

// Uniform tensor grid; cell centers at origin + (i + 1/2) h.
struct Grid {
  int n = 1;
  std::array<int, 3> cells{1, 1, 1};
  std::array<double, 3> h{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  Boundary boundary = Boundary::dirichlet_zero;

  std::size_t ncells() const {
    return static_cast<std::size_t>(cells[0]) * cells[1] * cells[2];
  }
  std::size_t index(int i, int j = 0, int k = 0) const {
    return (static_cast<std::size_t>(k) * cells[1] + j) * cells[0] + i;
  }
  void coords(std::size_t idx, int* i, int* j, int* k) const {
    *i = static_cast<int>(idx % cells[0]);
    *j = static_cast<int>((idx / cells[0]) % cells[1]);
    *k = static_cast<int>(idx / (static_cast<std::size_t>(cells[0]) * cells[1]));
  }
  VecN cell_center(int i, int j = 0, int k = 0) const {
    VecN x(n);
    const int c[3] = {i, j, k};
    for (int d = 0; d < n; ++d) x[d] = origin[d] + (c[d] + 0.5) * h[d];
    return x;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < n; ++d) v *= h[d];
    return v;
  }
  double hmax() const {
    double v = 0.0;
    for (int d = 0; d < n; ++d) v = std::max(v, h[d]);
    return v;
  }
  // Faces in direction d: count per axis equals cells, except the d-axis has
  // cells[d]+1 planes on dirichlet grids.  Face (i_d, ..) joins cell i_d - 1
  // to cell i_d (dirichlet; -1 and N are the ghost ring) resp. i_d to
  // i_d + 1 mod N (periodic).
  std::array<int, 3> face_dims(int d) const {
    std::array<int, 3> f = cells;
    if (boundary == Boundary::dirichlet_zero) f[d] += 1;
    for (int a = n; a < 3; ++a) f[a] = 1;
    return f;
  }
  std::size_t nfaces(int d) const {
    auto f = face_dims(d);
    return static_cast<std::size_t>(f[0]) * f[1] * f[2];
  }
  VecN face_center(int d, int i, int j = 0, int k = 0) const {
    VecN x(n);
    const int c[3] = {i, j, k};
    for (int a = 0; a < n; ++a) {
      if (a == d) {
        x[a] = (boundary == Boundary::dirichlet_zero) ? origin[a] + c[a] * h[a]
                                                      : origin[a] + (c[a] + 1.0) * h[a];
      } else {
        x[a] = origin[a] + (c[a] + 0.5) * h[a];
      }
    }
    return x;
  }
  double length(int d) const { return cells[d] * h[d]; }
};

struct GridSpec {
  int dim = 1;
  std::array<int, 3> cells{8, 1, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  Boundary boundary = Boundary::dirichlet_zero;
};

Grid build_grid(const GridSpec& spec);

// Cell-centered scalar samples.
struct ScalarField {
  Grid grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), v(g.ncells(), fill) {}
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const { return v.size(); }
};

ScalarField sample(const Grid& g, const std::function<double(const VecN&)>& f);

// Measure m = e^{-V} dx discretized per cell and per face.
struct WeightField {
  Grid grid;
  std::vector<double> cell_m;                    // e^{-V(c)} * cell volume
  std::array<std::vector<double>, 3> face_m;     // e^{-V(x_f)} * cell volume
  double total_mass = 0.0;
};

WeightField build_weight(const Grid& g, const std::function<double(const VecN&)>& V);
WeightField build_weight_zero(const Grid& g);  // Lebesgue

// Cell-wise Finsler structure.  Uniform fields carry one norm; varying
// fields deform a base norm by an invertible matrix sigma(x) evaluated at
// face midpoints (cached) and at arbitrary points on demand.
class FinslerField {
 public:
  FinslerField(Grid g, NormPtr uniform_norm);
  FinslerField(Grid g, NormPtr base, std::function<MatN(const VecN&)> sigma);

  const Grid& grid() const { return grid_; }
  bool uniform() const { return sigma_ == nullptr; }
  const Norm& face_norm(int d, std::size_t face_index) const {
    return uniform() ? *norm_ : *face_norms_[d][face_index];
  }
  NormPtr norm_at(const VecN& x) const;
  NormPtr uniform_norm() const { return norm_; }

  // Field-level constants: infimum over cells of the per-point constants.
  ConvexityConstants field_constants(int per_cell_budget, std::uint64_t seed) const;

  FinslerField reversed() const;

 private:
  Grid grid_;
  NormPtr norm_;                                  // uniform, or base of the deformation
  std::function<MatN(const VecN&)> sigma_;
  std::array<std::vector<NormPtr>, 3> face_norms_;
};

// Nonsymmetric distance field d(z, .) or d(., z).
//
// Uniform fields on boxes evaluate d(z,x) = F(x-z) exactly; on tori the
// minimum over lattice translates.  Varying fields run Dijkstra on a wide
// stencil with edge cost F(midpoint, dx).
enum class DistanceDirection { from_z, to_z };

struct DistanceField {
  ScalarField d;
  // Torus cells where two minimizing translates agree to within one cell;
  // discrete Laplacians of d are unreliable there (cut locus).
  std::vector<std::uint8_t> cut_mask;
};

DistanceField distance_field(const FinslerField& field, const std::array<int, 3>& z,
                             DistanceDirection dir);

// Weighted Lp norms of cell fields (p >= 1 or infinity).
double lp_norm(const ScalarField& u, const WeightField& w, double p);
double mass(const ScalarField& u, const WeightField& w);

}  // namespace finsler
