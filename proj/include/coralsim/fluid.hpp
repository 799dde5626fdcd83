/// @file fluid.hpp
/// @brief Incompressible flow pieces: Helmholtz projection, the resolvent
///        smoothing of the advecting velocity, an energy-neutral skew
///        convection operator, and the per-step fluid update.
///
/// The substep integrates
///     u_t + kappa (Yu . grad) u + grad P = Lap u + (n + m) grad phi
/// with explicit convection/buoyancy, implicit viscosity, and a final
/// projection, so the returned velocity is discretely divergence-free to
/// solver tolerance after every call.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"

namespace coralsim {

/// Explicit-term time-step violations (advective CFL and relatives).
struct CflError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A field stopped being finite; carries the field name in the message.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ===========================================================================
// Projection
// ===========================================================================

struct ProjectionResult {
  VectorField u;  ///< divergence-free part
  ScalarField q;  ///< mean-zero potential; the pressure update is q / dt
};

/// Helmholtz projection: q solves laplacian(q) = div(u_star), and
/// u = u_star - gradient(q). Because the discrete Laplacian is exactly
/// div(grad(.)), the divergence of the result equals the Poisson residual.
inline ProjectionResult project(const VectorField& u_star, PoissonSolver& solver) {
  ScalarField div = divergence(u_star);
  ScalarField q = solver.solve_poisson(div);
  VectorField grad_q = gradient(q);
  ProjectionResult res{u_star, std::move(q)};
  for (int a = 0; a < u_star.grid.dim; ++a)
    for (size_t idx = 0; idx < res.u.comp[a].size(); ++idx)
      res.u.comp[a][idx] -= grad_q.comp[a][idx];
  return res;
}

// ===========================================================================
// Resolvent smoothing
// ===========================================================================

/// Solve (I + eps * A) w = u with A = -(projected Laplacian) under the grid
/// boundary conditions. eps == 0 returns u unchanged (exact identity). On
/// periodic grids the Laplacian commutes with the projection, so the solve
/// reduces to a componentwise screened solve followed by one projection; in
/// Box mode an outer CG iterates with a nested (tighter) projection per
/// operator application. Contractive in the face-weighted L2 norm.
inline VectorField yosida(const VectorField& u, double eps, PoissonSolver& solver) {
  if (eps < 0.0) throw std::invalid_argument("yosida: eps must be >= 0");
  if (eps == 0.0) return u;
  const Grid& g = u.grid;
  if (g.bc == BcMode::Periodic) {
    VectorField w = solver.solve_helmholtz_faces(u, eps);
    return project(w, solver).u;
  }

  // Box mode: CG on Op(w) = w + eps * (-P Lap w) over the divergence-free,
  // zero-wall subspace. Inner projections run three digits tighter than the
  // outer tolerance so operator applications do not floor the outer residual.
  PoissonSolver inner(g, PoissonMethod::ConjugateGradientNeumann,
                      solver.tol() * 1e-3, 200000);
  VectorField b = project(u, inner).u;

  auto apply = [&](const VectorField& w) {
    VectorField lap = mac_laplacian(w);
    VectorField plap = project(lap, inner).u;
    VectorField out = w;
    for (int a = 0; a < g.dim; ++a)
      for (size_t i = 0; i < out.comp[a].size(); ++i)
        out.comp[a][i] -= eps * plap.comp[a][i];
    return out;
  };
  auto dotv = [&](const VectorField& x, const VectorField& y) {
    double s = 0.0;
    for (int a = 0; a < g.dim; ++a)
      for (size_t i = 0; i < x.comp[a].size(); ++i) s += x.comp[a][i] * y.comp[a][i];
    return s;
  };

  VectorField x(g);
  VectorField r = b;
  double rr = dotv(r, r);
  const double target = solver.tol() * (1.0 + std::sqrt(dotv(u, u)));
  bool converged = std::sqrt(rr) <= target;
  VectorField p = r;
  const int max_iter = 5000;
  for (int it = 0; !converged && it < max_iter; ++it) {
    VectorField ap = apply(p);
    const double pap = dotv(p, ap);
    if (!(pap > 0.0))
      throw SolverFailure("yosida: operator lost definiteness", std::sqrt(rr), it);
    const double alpha = rr / pap;
    for (int a = 0; a < g.dim; ++a)
      for (size_t i = 0; i < x.comp[a].size(); ++i) {
        x.comp[a][i] += alpha * p.comp[a][i];
        r.comp[a][i] -= alpha * ap.comp[a][i];
      }
    const double rr_new = dotv(r, r);
    converged = std::sqrt(rr_new) <= target;
    const double beta = rr_new / rr;
    rr = rr_new;
    for (int a = 0; a < g.dim; ++a)
      for (size_t i = 0; i < p.comp[a].size(); ++i)
        p.comp[a][i] = r.comp[a][i] + beta * p.comp[a][i];
  }
  if (!converged)
    throw SolverFailure("yosida: no convergence", std::sqrt(rr), max_iter);
  // Inner projection residuals leak a little divergence into the Krylov
  // iterates; one tight final projection pins the returned field's
  // divergence without disturbing the converged residual.
  return project(x, inner).u;
}

// ===========================================================================
// Skew convection
// ===========================================================================

/// Skew-stabilized convection C = Div(v (x) u) - (1/2) u * Dbar(v), where
/// Dbar is the advecting field's divergence interpolated to each face with
/// the same centered averages the fluxes use. The construction makes
/// <C, u> = 0 to round-off for ANY advecting field v, and reduces to the
/// plain divergence form when v is discretely divergence-free.
inline VectorField convection(const VectorField& v, const VectorField& u) {
  detail::require_same_grid(v.grid, u.grid, "convection");
  const Grid& g = u.grid;
  VectorField out(g);
  const bool box = g.bc == BcMode::Box;

  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    // helpers reading component fields with periodic wrap on demand
    auto uface = [&](int c, std::array<int, 3> ix) {
      if (!box)
        for (int d = 0; d < g.dim; ++d) {
          const int n = g.face_shape(c)[d];
          ix[d] = ((ix[d] % n) + n) % n;
        }
      return u.face(c, ix[0], ix[1], ix[2]);
    };
    auto vface = [&](int c, std::array<int, 3> ix) {
      if (!box)
        for (int d = 0; d < g.dim; ++d) {
          const int n = g.face_shape(c)[d];
          ix[d] = ((ix[d] % n) + n) % n;
        }
      return v.face(c, ix[0], ix[1], ix[2]);
    };

    detail::for_faces(g, a, [&](int i, int j, int k) {
      const std::array<int, 3> f{i, j, k};
      const int fa = f[static_cast<size_t>(a)];
      if (box && (fa == 0 || fa == n_a)) return;  // pinned wall face

      double conv = 0.0;  // divergence-form flux differences
      double dbar = 0.0;  // interpolated divergence of v at this face

      // --- own axis: fluxes at the two adjacent cell centers
      {
        const double inv_h = 1.0 / g.spacing[a];
        // cell with own-axis coordinate ca has bounding a-faces ca and ca+1
        auto cell_quants = [&](int ca, double& vbar, double& ubar) {
          std::array<int, 3> lo = f, hi = f;
          lo[a] = ca;
          hi[a] = ca + 1;  // wrap handled inside uface/vface for periodic
          vbar = 0.5 * (vface(a, lo) + vface(a, hi));
          ubar = 0.5 * (uface(a, lo) + uface(a, hi));
        };
        double vl, ul, vr, ur;
        cell_quants(fa - 1, vl, ul);  // left cell
        cell_quants(fa, vr, ur);      // right cell
        conv += (vr * ur - vl * ul) * inv_h;
        dbar += (vr - vl) * inv_h;
      }

      // --- transverse axes: fluxes at the two bounding edges
      for (int b = 0; b < g.dim; ++b) {
        if (b == a) continue;
        const double inv_h = 1.0 / g.spacing[b];
        const int n_b = g.shape[b];
        // edge at b-lattice coordinate eb, adjacent to this face
        auto edge_quants = [&](int eb, double& vbar, double& ubar) {
          if (box && (eb == 0 || eb == n_b)) {
            // wall edge: tangential u interpolates to the no-slip zero and
            // the normal advecting face is itself a stored wall zero
            vbar = 0.0;
            ubar = 0.0;
            return;
          }
          std::array<int, 3> cl = f, cr = f;
          cl[a] = fa - 1;  // b-face of the left adjacent cell
          cr[a] = fa;      // b-face of the right adjacent cell
          cl[b] = eb;
          cr[b] = eb;
          vbar = 0.5 * (vface(b, cl) + vface(b, cr));
          std::array<int, 3> ul = f, uh = f;
          ul[b] = eb - 1;
          uh[b] = eb;
          ubar = 0.5 * (uface(a, ul) + uface(a, uh));
        };
        const int eb_lo = f[static_cast<size_t>(b)];
        double vlo, ulo, vhi, uhi;
        edge_quants(eb_lo, vlo, ulo);
        edge_quants(eb_lo + 1, vhi, uhi);
        conv += (vhi * uhi - vlo * ulo) * inv_h;
        dbar += (vhi - vlo) * inv_h;
      }

      out.face(a, i, j, k) =
          conv - 0.5 * uface(a, f) * dbar;
    });
  }
  return out;
}

// ===========================================================================
// Substep
// ===========================================================================

/// One fluid step of size dt: explicit skew convection of the resolvent-
/// smoothed velocity (skipped bitwise when kappa == 0), explicit buoyancy,
/// implicit viscosity, projection. Returns the new velocity and pressure.
inline std::pair<VectorField, ScalarField> fluid_substep(const SimState& state,
                                                         const ModelParams& params,
                                                         double dt,
                                                         PoissonSolver& solver) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("fluid_substep: dt must be positive and finite");
  const Grid& g = state.grid();

  VectorField rhs = state.u;
  if (params.kappa != 0.0) {
    VectorField v = yosida(state.u, params.epsilon, solver);
    // explicit convection obeys a hard CFL; name the violating face if not
    for (int a = 0; a < g.dim; ++a) {
      double mx = 0.0;
      for (double val : v.comp[a]) mx = std::max(mx, std::abs(val));
      if (mx * dt / g.spacing[a] > 1.0 + 1e-12)
        throw CflError("fluid_substep: convection CFL violated on axis " +
                       std::to_string(a) + " (face speed " + std::to_string(mx) +
                       ", dt " + std::to_string(dt) + ", h " +
                       std::to_string(g.spacing[a]) + ")");
    }
    VectorField conv = convection(v, state.u);
    for (int a = 0; a < g.dim; ++a)
      for (size_t idx = 0; idx < rhs.comp[a].size(); ++idx)
        rhs.comp[a][idx] -= dt * params.kappa * conv.comp[a][idx];
  }
  VectorField force = buoyancy_force(params, state);
  for (int a = 0; a < g.dim; ++a)
    for (size_t idx = 0; idx < rhs.comp[a].size(); ++idx)
      rhs.comp[a][idx] += dt * force.comp[a][idx];

  VectorField u_star = solver.solve_helmholtz_faces(rhs, dt);
  ProjectionResult proj = project(u_star, solver);
  ScalarField p_new = std::move(proj.q);
  const double inv_dt = 1.0 / dt;
  for (double& val : p_new.v) val *= inv_dt;
  p_new.unit = "pressure";
  return {std::move(proj.u), std::move(p_new)};
}

}  // namespace coralsim
