/// @file grid.hpp
/// @brief Structured box grid, cell-centered scalar fields, face-staggered
///        vector fields, and the discrete calculus (gradient / divergence /
///        Laplacian) used by every other layer.
///
/// Layout conventions (fixed across the library):
///  - Cells are indexed (i, j, k), row-major with i fastest:
///        flat = (k * ny + j) * nx + i.
///    Cell centers sit at x_a = (i_a + 1/2) * h_a.
///  - Vector fields are staggered: component `a` lives on faces normal to
///    axis `a`. In Box mode the face lattice has shape[a] + 1 entries along
///    its own axis (walls included); in Periodic mode it has shape[a]
///    entries, face f sitting between cells (f-1 mod n) and f.
///  - 2D grids are stored as 3D with shape[2] == 1; axis 2 is never iterated.
///
/// Boundary conventions:
///  - Box: scalars obey the zero-normal-derivative (mirror ghost) rule, so
///    gradients on wall faces are exactly zero; vector fields represent
///    no-slip velocities, with normal components stored (and kept) zero on
///    wall faces.
///  - Periodic: everything wraps.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace coralsim {

// ===========================================================================
// Grid
// ===========================================================================

enum class BcMode {
  Box,       ///< closed box: no-flux scalars, no-slip velocity
  Periodic,  ///< torus: everything wraps
};

struct Grid {
  int dim = 2;
  std::array<int, 3> shape{1, 1, 1};       ///< cells per axis (1 on unused axes)
  std::array<double, 3> extent{1, 1, 1};   ///< box side lengths (1 on unused axes)
  std::array<double, 3> spacing{1, 1, 1};  ///< extent / shape
  BcMode bc = BcMode::Box;

  int cells() const { return shape[0] * shape[1] * shape[2]; }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing[a];
    return v;
  }
  /// Euclidean diameter of the box.
  double diameter() const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += extent[a] * extent[a];
    return std::sqrt(s);
  }
  int cell_index(int i, int j, int k) const {
    return (k * shape[1] + j) * shape[0] + i;
  }
  /// Coordinate of a cell center.
  std::array<double, 3> cell_center(int i, int j, int k) const {
    return {(i + 0.5) * spacing[0], (j + 0.5) * spacing[1], (k + 0.5) * spacing[2]};
  }
  /// Number of stored faces along axis `a` for the component that lives there.
  int faces_along(int a) const {
    return bc == BcMode::Box ? shape[a] + 1 : shape[a];
  }
  /// Shape of the face lattice of component `a`.
  std::array<int, 3> face_shape(int a) const {
    std::array<int, 3> s = shape;
    s[a] = faces_along(a);
    return s;
  }
  int face_count(int a) const {
    auto s = face_shape(a);
    return s[0] * s[1] * s[2];
  }
  int face_index(int a, int i, int j, int k) const {
    auto s = face_shape(a);
    return (k * s[1] + j) * s[0] + i;
  }
  /// Coordinate of the center of face `f` of component `a`: offset by h/2 on
  /// every axis except its own.
  std::array<double, 3> face_center(int a, int i, int j, int k) const {
    std::array<double, 3> x{(i + 0.5) * spacing[0], (j + 0.5) * spacing[1],
                            (k + 0.5) * spacing[2]};
    x[a] = (a == 0 ? i : a == 1 ? j : k) * spacing[a];
    return x;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim == b.dim && a.shape == b.shape && a.extent == b.extent &&
           a.bc == b.bc;
  }
  friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }
};

/// Build a validated grid. Throws std::invalid_argument on bad input.
inline Grid make_grid(int dim, std::array<int, 3> shape,
                      std::array<double, 3> extent, BcMode bc) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("make_grid: dim must be 2 or 3");
  Grid g;
  g.dim = dim;
  g.bc = bc;
  for (int a = 0; a < 3; ++a) {
    if (a < dim) {
      if (shape[a] < 4)
        throw std::invalid_argument("make_grid: need at least 4 cells per axis");
      if (!(extent[a] > 0.0) || !std::isfinite(extent[a]))
        throw std::invalid_argument("make_grid: extent must be positive and finite");
      g.shape[a] = shape[a];
      g.extent[a] = extent[a];
      g.spacing[a] = extent[a] / shape[a];
    } else {
      g.shape[a] = 1;
      g.extent[a] = 1.0;
      g.spacing[a] = 1.0;
    }
  }
  return g;
}

// ===========================================================================
// Fields
// ===========================================================================

struct ScalarField {
  Grid grid;
  std::vector<double> v;
  std::string unit;  ///< advisory tag only; never enters arithmetic

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0, std::string u = {})
      : grid(g), v(static_cast<size_t>(g.cells()), fill), unit(std::move(u)) {}

  double& at(int i, int j, int k) { return v[grid.cell_index(i, j, k)]; }
  double at(int i, int j, int k) const { return v[grid.cell_index(i, j, k)]; }
  double& operator[](size_t idx) { return v[idx]; }
  double operator[](size_t idx) const { return v[idx]; }
  size_t size() const { return v.size(); }
};

struct VectorField {
  Grid grid;
  std::array<std::vector<double>, 3> comp;  ///< comp[a] on a-normal faces

  VectorField() = default;
  explicit VectorField(const Grid& g, double fill = 0.0) : grid(g) {
    for (int a = 0; a < g.dim; ++a)
      comp[a].assign(static_cast<size_t>(g.face_count(a)), fill);
  }

  double& face(int a, int i, int j, int k) {
    return comp[a][grid.face_index(a, i, j, k)];
  }
  double face(int a, int i, int j, int k) const {
    return comp[a][grid.face_index(a, i, j, k)];
  }
};

namespace detail {
inline void require_same_grid(const Grid& a, const Grid& b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": grid mismatch");
}
/// Visit all cells of a grid in storage order.
template <class F>
inline void for_cells(const Grid& g, F&& f) {
  for (int k = 0; k < g.shape[2]; ++k)
    for (int j = 0; j < g.shape[1]; ++j)
      for (int i = 0; i < g.shape[0]; ++i) f(i, j, k);
}
/// Visit all stored faces of component `a` in storage order.
template <class F>
inline void for_faces(const Grid& g, int a, F&& f) {
  auto s = g.face_shape(a);
  for (int k = 0; k < s[2]; ++k)
    for (int j = 0; j < s[1]; ++j)
      for (int i = 0; i < s[0]; ++i) f(i, j, k);
}
}  // namespace detail

// ===========================================================================
// Reductions
// ===========================================================================

/// Midpoint-rule integral: sum of cell values times cell volume.
inline double integrate(const ScalarField& f) {
  double s = 0.0;
  for (double x : f.v) s += x;
  return s * f.grid.cell_volume();
}

/// Discrete L^p norm with the same midpoint weights. p may be infinity.
/// Throws std::invalid_argument for p < 1.
inline double lp_norm(const ScalarField& f, double p) {
  if (std::isinf(p) && p > 0) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::abs(x));
    return m;
  }
  if (!(p >= 1.0))
    throw std::invalid_argument("lp_norm: p must be >= 1 (or infinity)");
  double s = 0.0;
  for (double x : f.v) s += std::pow(std::abs(x), p);
  return std::pow(s * f.grid.cell_volume(), 1.0 / p);
}

/// Cell-weighted inner product of two scalar fields.
inline double dot_cells(const ScalarField& f, const ScalarField& g) {
  detail::require_same_grid(f.grid, g.grid, "dot_cells");
  double s = 0.0;
  for (size_t idx = 0; idx < f.v.size(); ++idx) s += f.v[idx] * g.v[idx];
  return s * f.grid.cell_volume();
}

/// Face-weighted inner product of two vector fields (each stored face carries
/// one full cell volume; wall faces in Box mode hold zeros by convention).
inline double dot_faces(const VectorField& u, const VectorField& w) {
  detail::require_same_grid(u.grid, w.grid, "dot_faces");
  double s = 0.0;
  for (int a = 0; a < u.grid.dim; ++a)
    for (size_t idx = 0; idx < u.comp[a].size(); ++idx)
      s += u.comp[a][idx] * w.comp[a][idx];
  return s * u.grid.cell_volume();
}

/// Face-weighted squared L2 norm of a vector field.
inline double l2sq_faces(const VectorField& u) { return dot_faces(u, u); }

// ===========================================================================
// Discrete calculus
// ===========================================================================

/// Face gradient of a cell-centered field. Box mode: wall faces are exactly
/// zero (mirror ghost); Periodic mode wraps.
inline VectorField gradient(const ScalarField& f) {
  const Grid& g = f.grid;
  VectorField out(g);
  for (int a = 0; a < g.dim; ++a) {
    const double inv_h = 1.0 / g.spacing[a];
    const int n = g.shape[a];
    detail::for_faces(g, a, [&](int i, int j, int k) {
      const int fa = (a == 0 ? i : a == 1 ? j : k);
      double hi, lo;
      if (g.bc == BcMode::Box) {
        if (fa == 0 || fa == n) {  // wall: mirror ghost, zero normal gradient
          out.face(a, i, j, k) = 0.0;
          return;
        }
        int ci = i, cj = j, ck = k;
        (a == 0 ? ci : a == 1 ? cj : ck) -= 1;
        hi = f.at(i, j, k);
        lo = f.at(ci, cj, ck);
      } else {
        // face fa sits between cells (fa-1 mod n) and fa
        int ci = i, cj = j, ck = k;
        (a == 0 ? ci : a == 1 ? cj : ck) = (fa - 1 + n) % n;
        hi = f.at(i, j, k);
        lo = f.at(ci, cj, ck);
      }
      out.face(a, i, j, k) = (hi - lo) * inv_h;
    });
  }
  return out;
}

/// Cell divergence of a face field: per cell, sum of (right face - left face)
/// over each axis, divided by spacing.
inline ScalarField divergence(const VectorField& u) {
  const Grid& g = u.grid;
  ScalarField out(g);
  for (int a = 0; a < g.dim; ++a) {
    const double inv_h = 1.0 / g.spacing[a];
    const int n = g.shape[a];
    detail::for_cells(g, [&](int i, int j, int k) {
      int ri = i, rj = j, rk = k;
      int& r = (a == 0 ? ri : a == 1 ? rj : rk);
      double right, left;
      if (g.bc == BcMode::Box) {
        left = u.face(a, i, j, k);
        r += 1;
        right = u.face(a, ri, rj, rk);
      } else {
        left = u.face(a, i, j, k);
        r = (r + 1) % n;
        right = u.face(a, ri, rj, rk);
      }
      out.at(i, j, k) += (right - left) * inv_h;
    });
  }
  return out;
}

/// Compact 7-point (5-point in 2D) Laplacian, identical to
/// divergence(gradient(f)) but evaluated in one pass into a preallocated
/// output (the iterative solvers call this once per iteration). Symmetric and
/// negative-semidefinite under both boundary modes.
inline void laplacian_into(const ScalarField& f, ScalarField& out) {
  const Grid& g = f.grid;
  if (out.grid != g) out = ScalarField(g);
  std::fill(out.v.begin(), out.v.end(), 0.0);
  for (int a = 0; a < g.dim; ++a) {
    const double inv_h2 = 1.0 / (g.spacing[a] * g.spacing[a]);
    const int n = g.shape[a];
    detail::for_cells(g, [&](int i, int j, int k) {
      const int ca = (a == 0 ? i : a == 1 ? j : k);
      const double fc = f.at(i, j, k);
      // gradient on the right face minus gradient on the left face, fused
      double gr, gl;
      if (g.bc == BcMode::Box) {
        if (ca == n - 1) {
          gr = 0.0;
        } else {
          int ri = i, rj = j, rk = k;
          (a == 0 ? ri : a == 1 ? rj : rk) += 1;
          gr = f.at(ri, rj, rk) - fc;
        }
        if (ca == 0) {
          gl = 0.0;
        } else {
          int li = i, lj = j, lk = k;
          (a == 0 ? li : a == 1 ? lj : lk) -= 1;
          gl = fc - f.at(li, lj, lk);
        }
      } else {
        int ri = i, rj = j, rk = k;
        (a == 0 ? ri : a == 1 ? rj : rk) = (ca + 1) % n;
        int li = i, lj = j, lk = k;
        (a == 0 ? li : a == 1 ? lj : lk) = (ca - 1 + n) % n;
        gr = f.at(ri, rj, rk) - fc;
        gl = fc - f.at(li, lj, lk);
      }
      out.at(i, j, k) += (gr - gl) * inv_h2;
    });
  }
}

inline ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.grid);
  laplacian_into(f, out);
  return out;
}

}  // namespace coralsim
