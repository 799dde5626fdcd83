/// @file model.hpp
/// @brief Model parameters, simulation state, the bounded chemotactic
///        sensitivity families, the boundary cutoff, and the two face-centered
///        source terms (chemotactic flux, buoyancy force).
///
/// The model couples four scalar/vector fields on one grid:
///   n  sperm density        (cell-centered)
///   c  chemoattractant      (cell-centered)
///   m  egg density          (cell-centered)
///   u  fluid velocity       (face-staggered), p pressure (cell-centered)
///
/// The chemotactic flux is regularized in two ways controlled by epsilon:
/// the transported density enters as n/(1 + eps*n), and in Box mode an
/// optional smooth boundary cutoff rho scales the sensitivity to zero at the
/// walls over a width proportional to eps.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "coralsim/grid.hpp"

namespace coralsim {

// ===========================================================================
// Parameters and state
// ===========================================================================

enum class SensitivityKind {
  ScalarDecay,      ///< C_S (1+n)^-alpha * I — saturates the norm bound
  DiagonalDecay,    ///< per-axis scales in (0,1] times the scalar envelope
  RotationalDecay,  ///< scalar envelope times a fixed rotation (norm-preserving)
};

struct ModelParams {
  double alpha = 0.5;    ///< sensitivity decay exponent, >= 0
  double c_s = 1.0;      ///< sensitivity amplitude C_S, > 0
  double kappa = 1.0;    ///< convection switch/strength in the fluid equation
  double epsilon = 0.1;  ///< regularization strength, >= 0
  SensitivityKind sensitivity = SensitivityKind::ScalarDecay;
  std::array<double, 3> diag_scale{1.0, 1.0, 1.0};  ///< DiagonalDecay factors
  double rot_angle = 0.5;                           ///< RotationalDecay angle
  std::array<double, 3> rot_axis{0.0, 0.0, 1.0};    ///< 3D rotation axis
  ScalarField phi;          ///< gravitational/buoyancy potential on the grid
  double run_T = 1.0;       ///< time horizon
  double cutoff_margin = 0.0;  ///< boundary cutoff width factor, in [0, 0.5)

  /// Validate against the grid the run will use. Throws std::invalid_argument.
  void validate(const Grid& grid) const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw std::invalid_argument("ModelParams: alpha must be finite and >= 0");
    if (!(c_s > 0.0) || !std::isfinite(c_s))
      throw std::invalid_argument("ModelParams: c_s must be finite and > 0");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("ModelParams: epsilon must be finite and >= 0");
    if (!std::isfinite(kappa))
      throw std::invalid_argument("ModelParams: kappa must be finite");
    if (!(run_T >= 0.0) || !std::isfinite(run_T))
      throw std::invalid_argument("ModelParams: run_T must be finite and >= 0");
    if (!(cutoff_margin >= 0.0 && cutoff_margin < 0.5))
      throw std::invalid_argument("ModelParams: cutoff_margin must lie in [0, 0.5)");
    for (int a = 0; a < grid.dim; ++a)
      if (!(diag_scale[a] > 0.0 && diag_scale[a] <= 1.0))
        throw std::invalid_argument("ModelParams: diag_scale entries must lie in (0, 1]");
    if (phi.grid != grid)
      throw std::invalid_argument("ModelParams: phi does not live on the run grid");
    for (double v : phi.v)
      if (!std::isfinite(v))
        throw std::invalid_argument("ModelParams: phi has non-finite values");
  }
};

struct SimState {
  double t = 0.0;
  ScalarField n, c, m, p;
  VectorField u;

  SimState() = default;
  explicit SimState(const Grid& g)
      : n(g, 0.0, "density"),
        c(g, 0.0, "concentration"),
        m(g, 0.0, "density"),
        p(g, 0.0, "pressure"),
        u(g) {}
  const Grid& grid() const { return n.grid; }
};

// ===========================================================================
// Sensitivity tensor
// ===========================================================================

/// Small dense dim x dim matrix, the value of the sensitivity S(x, n, c).
struct Sensitivity {
  int dim = 2;
  std::array<std::array<double, 3>, 3> a{};  ///< a[row][col]

  /// Matrix-vector product on the first `dim` components.
  std::array<double, 3> apply(const std::array<double, 3>& v) const {
    std::array<double, 3> r{0.0, 0.0, 0.0};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) r[i] += a[i][j] * v[j];
    return r;
  }
};

/// Evaluate the sensitivity family at one point. All families obey the
/// operator-norm bound |S| <= c_s * (1+n)^(-alpha); ScalarDecay attains it.
/// Throws std::invalid_argument for negative n (a stepper-positivity tripwire).
inline Sensitivity eval_sensitivity(const ModelParams& p,
                                    const std::array<double, 3>& /*x*/,
                                    double n, double /*c*/, int dim) {
  if (n < 0.0) throw std::invalid_argument("eval_sensitivity: negative n");
  const double sigma = p.c_s * std::pow(1.0 + n, -p.alpha);
  Sensitivity s;
  s.dim = dim;
  switch (p.sensitivity) {
    case SensitivityKind::ScalarDecay:
      for (int i = 0; i < dim; ++i) s.a[i][i] = sigma;
      break;
    case SensitivityKind::DiagonalDecay:
      for (int i = 0; i < dim; ++i) s.a[i][i] = sigma * p.diag_scale[i];
      break;
    case SensitivityKind::RotationalDecay: {
      const double cth = std::cos(p.rot_angle), sth = std::sin(p.rot_angle);
      if (dim == 2) {
        s.a[0][0] = sigma * cth;
        s.a[0][1] = -sigma * sth;
        s.a[1][0] = sigma * sth;
        s.a[1][1] = sigma * cth;
      } else {
        // rotation about the (normalized) configured axis
        double ax = p.rot_axis[0], ay = p.rot_axis[1], az = p.rot_axis[2];
        const double norm = std::sqrt(ax * ax + ay * ay + az * az);
        if (!(norm > 0.0))
          throw std::invalid_argument("eval_sensitivity: zero rotation axis");
        ax /= norm;
        ay /= norm;
        az /= norm;
        const double omc = 1.0 - cth;
        const double r[3][3] = {
            {cth + ax * ax * omc, ax * ay * omc - az * sth, ax * az * omc + ay * sth},
            {ay * ax * omc + az * sth, cth + ay * ay * omc, ay * az * omc - ax * sth},
            {az * ax * omc - ay * sth, az * ay * omc + ax * sth, cth + az * az * omc}};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) s.a[i][j] = sigma * r[i][j];
      }
      break;
    }
  }
  return s;
}

// ===========================================================================
// Boundary cutoff
// ===========================================================================

/// Smooth boundary cutoff rho_eps(x) in [0, 1]: identically 1 on periodic
/// grids, for eps == 0, or for cutoff_margin == 0; otherwise a cubic
/// smoothstep of the wall distance over width cutoff_margin * eps * diam.
/// Pointwise nondecreasing as eps decreases (the band shrinks).
inline double cutoff_rho(const ModelParams& p, const Grid& g,
                         const std::array<double, 3>& x) {
  if (g.bc == BcMode::Periodic || p.epsilon == 0.0 || p.cutoff_margin == 0.0)
    return 1.0;
  const double w = p.cutoff_margin * p.epsilon * g.diameter();
  double dist = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.dim; ++a)
    dist = std::min(dist, std::min(x[a], g.extent[a] - x[a]));
  double s = dist / w;
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * (3.0 - 2.0 * s);
}

// ===========================================================================
// Face-centered source terms
// ===========================================================================

namespace detail {

/// One pass over all faces of the chemotactic term. For every stored,
/// non-wall face the callback receives
///   (axis, i, j, k, flux_component, transport_speed)
/// where flux = [n/(1+eps n)] * rho * S * grad(c) and speed is the capped
/// per-face transport velocity magnitude |rho/(1+eps n) * S grad c| used by
/// the time-step bound. Wall faces (Box mode) are skipped: both are zero.
template <class F>
inline void chemo_scan(const ModelParams& p, const SimState& st, F&& emit) {
  const Grid& g = st.grid();
  const VectorField gc = gradient(st.c);
  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    detail::for_faces(g, a, [&](int i, int j, int k) {
      const int fa = (a == 0 ? i : a == 1 ? j : k);
      if (g.bc == BcMode::Box && (fa == 0 || fa == n_a)) return;
      // adjacent cells: L has own-axis coordinate fa-1 (wrapped), R has fa
      int li = i, lj = j, lk = k;
      (a == 0 ? li : a == 1 ? lj : lk) = (fa - 1 + n_a) % n_a;
      int ri = i, rj = j, rk = k;
      (a == 0 ? ri : a == 1 ? rj : rk) = fa % n_a;
      const double nbar = 0.5 * (st.n.at(li, lj, lk) + st.n.at(ri, rj, rk));
      const double cbar = 0.5 * (st.c.at(li, lj, lk) + st.c.at(ri, rj, rk));
      // gradient of c at this face: own axis direct, transverse axes as the
      // average of the four (two in 2D) surrounding transverse-face values
      std::array<double, 3> gvec{0.0, 0.0, 0.0};
      gvec[a] = gc.face(a, i, j, k);
      for (int b = 0; b < g.dim; ++b) {
        if (b == a) continue;
        const int n_b = g.shape[b];
        double sum = 0.0;
        for (int side = 0; side < 2; ++side) {  // cells L and R
          const int ci = side ? ri : li, cj = side ? rj : lj, ck = side ? rk : lk;
          // lower and upper b-face of that cell
          int ui = ci, uj = cj, uk = ck;
          int& ub = (b == 0 ? ui : b == 1 ? uj : uk);
          ub = (g.bc == BcMode::Box) ? ub + 1 : (ub + 1) % n_b;
          sum += gc.face(b, ci, cj, ck) + gc.face(b, ui, uj, uk);
        }
        gvec[b] = 0.25 * sum;
      }
      const auto x = g.face_center(a, i, j, k);
      const Sensitivity s = eval_sensitivity(p, x, nbar, cbar, g.dim);
      const auto sg = s.apply(gvec);
      const double rho = cutoff_rho(p, g, x);
      const double damp = rho / (1.0 + p.epsilon * nbar);
      const double speed =
          damp * std::sqrt(sg[0] * sg[0] + sg[1] * sg[1] + sg[2] * sg[2]);
      emit(a, i, j, k, nbar * damp * sg[a], speed);
    });
  }
}

}  // namespace detail

/// Regularized chemotactic flux F = [n/(1+eps n)] * rho_eps * S(x,n,c) grad c
/// on faces. Scalars are averaged arithmetically onto faces; Box-mode wall
/// faces are exactly zero (no-flux).
inline VectorField regularized_flux(const ModelParams& p, const SimState& st) {
  VectorField out(st.grid());
  detail::chemo_scan(p, st, [&](int a, int i, int j, int k, double flux, double) {
    out.face(a, i, j, k) = flux;
  });
  return out;
}

/// Per-axis maximum of the capped chemotactic transport speed, for the
/// time-step bound.
inline std::array<double, 3> chemotactic_speed_max(const ModelParams& p,
                                                   const SimState& st) {
  std::array<double, 3> mx{0.0, 0.0, 0.0};
  detail::chemo_scan(p, st, [&](int a, int, int, int, double, double speed) {
    mx[a] = std::max(mx[a], speed);
  });
  return mx;
}

/// Buoyancy force (n + m) grad(phi) on faces; wall faces are zero in Box mode
/// (pinned no-slip entries never receive forcing).
inline VectorField buoyancy_force(const ModelParams& p, const SimState& st) {
  const Grid& g = st.grid();
  VectorField out = gradient(p.phi);
  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    detail::for_faces(g, a, [&](int i, int j, int k) {
      const int fa = (a == 0 ? i : a == 1 ? j : k);
      if (g.bc == BcMode::Box && (fa == 0 || fa == n_a)) {
        out.face(a, i, j, k) = 0.0;
        return;
      }
      int li = i, lj = j, lk = k;
      (a == 0 ? li : a == 1 ? lj : lk) = (fa - 1 + n_a) % n_a;
      int ri = i, rj = j, rk = k;
      (a == 0 ? ri : a == 1 ? rj : rk) = fa % n_a;
      const double nm = 0.5 * (st.n.at(li, lj, lk) + st.m.at(li, lj, lk) +
                               st.n.at(ri, rj, rk) + st.m.at(ri, rj, rk));
      out.face(a, i, j, k) *= nm;
    });
  }
  return out;
}

// ===========================================================================
// Potentials
// ===========================================================================

/// Named potential profiles for the buoyancy term, sampled at cell centers.
/// "linear_*" are affine ramps (centered); "cosine_*" are smooth periodic
/// ramps; "radial" is a centered Gaussian well.
inline ScalarField make_potential(const Grid& g, const std::string& name) {
  ScalarField phi(g, 0.0, "potential");
  auto fill = [&](auto&& f) {
    detail::for_cells(g, [&](int i, int j, int k) {
      phi.at(i, j, k) = f(g.cell_center(i, j, k));
    });
  };
  if (name == "zero") {
    return phi;
  } else if (name == "linear_x") {
    fill([&](std::array<double, 3> x) { return x[0] - 0.5 * g.extent[0]; });
  } else if (name == "linear_y") {
    fill([&](std::array<double, 3> x) { return x[1] - 0.5 * g.extent[1]; });
  } else if (name == "linear_z") {
    if (g.dim < 3)
      throw std::invalid_argument("make_potential: linear_z needs a 3D grid");
    fill([&](std::array<double, 3> x) { return x[2] - 0.5 * g.extent[2]; });
  } else if (name == "cosine_x") {
    const double w = 2.0 * M_PI / g.extent[0];
    fill([&](std::array<double, 3> x) { return std::cos(w * x[0]) / w; });
  } else if (name == "cosine_y") {
    const double w = 2.0 * M_PI / g.extent[1];
    fill([&](std::array<double, 3> x) { return std::cos(w * x[1]) / w; });
  } else if (name == "radial") {
    double mn = g.extent[0];
    for (int a = 0; a < g.dim; ++a) mn = std::min(mn, g.extent[a]);
    const double s2 = 2.0 * (0.25 * mn) * (0.25 * mn);
    fill([&](std::array<double, 3> x) {
      double r2 = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        const double d = x[a] - 0.5 * g.extent[a];
        r2 += d * d;
      }
      return -std::exp(-r2 / s2);
    });
  } else {
    throw std::invalid_argument("make_potential: unknown potential '" + name + "'");
  }
  return phi;
}

}  // namespace coralsim
