/// @file diagnostics.hpp
/// @brief Per-step diagnostics: conserved/monotone summaries, the alpha-
///        dependent exponent set, the energy functional (with its entropy
///        branch), cumulative dissipation/bulk ledgers, and the affine
///        envelope fit used to check ledger growth against C * (T + 1).

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "coralsim/fluid.hpp"
#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"

namespace coralsim {

// ===========================================================================
// Exponents
// ===========================================================================

/// The alpha-dependent integrability exponents tracked by the ledgers.
struct ExponentSet {
  double alpha;
  double p;        ///< 4 alpha + 2/3, the Lp index for n
  double gamma0;   ///< min(3 alpha + 1, 2), gradient integrability of n
  double r_flux;   ///< (12 alpha + 4) / (3 alpha + 4), flux integrability
  double r_nu;     ///< (2 + 6 alpha) / (2 + 3 alpha), n*u integrability
  double r_bulk;   ///< (12 alpha + 4) / 3 = 2p - 4 alpha, bulk power of n
};

inline ExponentSet exponents(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("exponents: alpha must be finite and >= 0");
  ExponentSet e;
  e.alpha = alpha;
  e.p = 4.0 * alpha + 2.0 / 3.0;
  e.gamma0 = std::min(3.0 * alpha + 1.0, 2.0);
  e.r_flux = (12.0 * alpha + 4.0) / (3.0 * alpha + 4.0);
  e.r_nu = (2.0 + 6.0 * alpha) / (2.0 + 3.0 * alpha);
  e.r_bulk = (12.0 * alpha + 4.0) / 3.0;
  return e;
}

/// Exact alpha at which the Lp functional degenerates to the entropy
/// (p == 1). Branch selection compares against this double bitwise.
inline constexpr double entropy_alpha() { return 1.0 / 12.0; }

// ===========================================================================
// Pointwise helpers
// ===========================================================================

namespace detail {

/// Integral of f^q (cell sum; no absolute value — callers pass nonnegative f).
inline double integral_pow(const ScalarField& f, double q) {
  double s = 0.0;
  for (double v : f.v) s += std::pow(v, q);
  return s * f.grid.cell_volume();
}

/// Integral of f * ln f with the 0 * ln 0 = 0 convention (log floored at
/// 1e-300 so exact zeros contribute exactly zero).
inline double integral_entropy(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.v) s += v * std::log(std::max(v, 1e-300));
  return s * f.grid.cell_volume();
}

/// |grad f|^2 interpolated to cells: per axis, the average of the squared
/// bounding-face gradients.
inline ScalarField grad_sq_cells(const ScalarField& f) {
  const Grid& g = f.grid;
  const VectorField gr = gradient(f);
  ScalarField out(g);
  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    detail::for_cells(g, [&](int i, int j, int k) {
      const double lo = gr.face(a, i, j, k);
      int ri = i, rj = j, rk = k;
      int& r = (a == 0 ? ri : a == 1 ? rj : rk);
      r = g.bc == BcMode::Box ? r + 1 : (r + 1) % n_a;
      const double hi = gr.face(a, ri, rj, rk);
      out.at(i, j, k) += 0.5 * (lo * lo + hi * hi);
    });
  }
  return out;
}

/// Velocity magnitude at cells: per-axis average of the bounding faces.
inline ScalarField speed_cells(const VectorField& u) {
  const Grid& g = u.grid;
  ScalarField out(g);
  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    detail::for_cells(g, [&](int i, int j, int k) {
      const double lo = u.face(a, i, j, k);
      int ri = i, rj = j, rk = k;
      int& r = (a == 0 ? ri : a == 1 ? rj : rk);
      r = g.bc == BcMode::Box ? r + 1 : (r + 1) % n_a;
      const double hi = u.face(a, ri, rj, rk);
      const double mid = 0.5 * (lo + hi);
      out.at(i, j, k) += mid * mid;
    });
  }
  for (double& v : out.v) v = std::sqrt(v);
  return out;
}

}  // namespace detail

// ===========================================================================
// Records
// ===========================================================================

struct DiagnosticsRecord {
  double t = 0.0;
  double dt = 0.0;
  double mass_n = 0.0, mass_m = 0.0, mass_c = 0.0;
  double sup_m = 0.0, sup_c = 0.0;
  double grad_c_l2sq = 0.0;
  double u_l2sq = 0.0;
  double n_lp = 0.0;       ///< integral of n^p at the configured alpha
  double entropy_n = 0.0;  ///< integral of n ln n (0 ln 0 = 0)
  double energy = 0.0;
  double div_u_max = 0.0;
};

/// The energy functional: for alpha != 1/12 (bitwise),
///   (1/p) \int n^p + a \int |grad c|^2 + b \int |u|^2;
/// exactly at alpha == 1/12 the first term degenerates to \int n ln n.
inline double energy_functional(const SimState& st, const ModelParams& params,
                                double a = 1.0, double b = 1.0) {
  const VectorField gc = gradient(st.c);
  const double grad_term = dot_faces(gc, gc);
  const double kin_term = l2sq_faces(st.u);
  double lead;
  if (params.alpha == entropy_alpha()) {
    lead = detail::integral_entropy(st.n);
  } else {
    const double p = exponents(params.alpha).p;
    lead = detail::integral_pow(st.n, p) / p;
  }
  return lead + a * grad_term + b * kin_term;
}

/// Summarize one state (dt records the step that produced it; 0 for t = 0).
inline DiagnosticsRecord record(const SimState& st, const ModelParams& params,
                                double dt) {
  DiagnosticsRecord r;
  r.t = st.t;
  r.dt = dt;
  r.mass_n = integrate(st.n);
  r.mass_m = integrate(st.m);
  r.mass_c = integrate(st.c);
  r.sup_m = lp_norm(st.m, std::numeric_limits<double>::infinity());
  r.sup_c = lp_norm(st.c, std::numeric_limits<double>::infinity());
  const VectorField gc = gradient(st.c);
  r.grad_c_l2sq = dot_faces(gc, gc);
  r.u_l2sq = l2sq_faces(st.u);
  r.n_lp = detail::integral_pow(st.n, exponents(params.alpha).p);
  r.entropy_n = detail::integral_entropy(st.n);
  r.energy = energy_functional(st, params);
  r.div_u_max = lp_norm(divergence(st.u), std::numeric_limits<double>::infinity());
  return r;
}

// ===========================================================================
// Dissipation / bulk ledgers
// ===========================================================================

/// Cumulative time integrals, accumulated by the right-endpoint rectangle
/// rule: after each step, ledger += dt * integrand(state_next).
struct DissipationLedger {
  double D1 = 0.0;  ///< \int\int |grad u|^2      (viscous dissipation)
  double D2 = 0.0;  ///< \int\int |grad c|^4
  double D3 = 0.0;  ///< \int ||grad n^{p/2}||_2^2
  double D4 = 0.0;  ///< \int\int |Lap c|^2
  double D5 = 0.0;  ///< \int\int |grad m|^2
  double B1 = 0.0;  ///< \int\int n^{r_bulk}
  double B2 = 0.0;  ///< \int\int |grad n|^{gamma0}
  double B3 = 0.0;  ///< \int\int |n u|^{r_nu}
};

inline DissipationLedger update_ledger(const DissipationLedger& ledger,
                                       const SimState& /*state_prev*/,
                                       const SimState& state_next,
                                       const ModelParams& params, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("update_ledger: dt must be >= 0");
  const ExponentSet e = exponents(params.alpha);
  const Grid& g = state_next.grid();
  DissipationLedger out = ledger;

  // D1 via the operator pairing <-Lap u, u>, the dissipation the implicit
  // viscous solve actually sees (includes the no-slip ghost contributions)
  {
    const VectorField lap = mac_laplacian(state_next.u);
    out.D1 += dt * -dot_faces(lap, state_next.u);
  }
  {
    const ScalarField gc2 = detail::grad_sq_cells(state_next.c);
    double s = 0.0;
    for (double v : gc2.v) s += v * v;
    out.D2 += dt * s * g.cell_volume();
  }
  {
    ScalarField w(g);
    const double q = 0.5 * e.p;
    for (size_t idx = 0; idx < w.v.size(); ++idx)
      w.v[idx] = std::pow(state_next.n.v[idx], q);
    const VectorField gw = gradient(w);
    out.D3 += dt * dot_faces(gw, gw);
  }
  {
    const ScalarField lc = laplacian(state_next.c);
    out.D4 += dt * dot_cells(lc, lc);
  }
  {
    const VectorField gm = gradient(state_next.m);
    out.D5 += dt * dot_faces(gm, gm);
  }
  out.B1 += dt * detail::integral_pow(state_next.n, e.r_bulk);
  {
    const ScalarField gn2 = detail::grad_sq_cells(state_next.n);
    double s = 0.0;
    for (double v : gn2.v) s += std::pow(v, 0.5 * e.gamma0);
    out.B2 += dt * s * g.cell_volume();
  }
  {
    const ScalarField sp = detail::speed_cells(state_next.u);
    double s = 0.0;
    for (size_t idx = 0; idx < sp.v.size(); ++idx)
      s += std::pow(state_next.n.v[idx] * sp.v[idx], e.r_nu);
    out.B3 += dt * s * g.cell_volume();
  }
  return out;
}

// ===========================================================================
// Envelope fit
// ===========================================================================

/// Least-squares affine fit value ~ slope * T + intercept over checkpoints
/// (T_i, value_i), with the largest positive deviation above the fit.
struct EnvelopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_violation = 0.0;
};

inline EnvelopeFit envelope_fit(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3)
    throw std::invalid_argument("envelope_fit: need at least 3 checkpoints");
  double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
  const double n = static_cast<double>(pts.size());
  for (const auto& [t, v] : pts) {
    st += t;
    sv += v;
    stt += t * t;
    stv += t * v;
  }
  const double det = n * stt - st * st;
  if (!(std::abs(det) > 0.0))
    throw std::invalid_argument("envelope_fit: degenerate checkpoint times");
  EnvelopeFit fit;
  fit.slope = (n * stv - st * sv) / det;
  fit.intercept = (stt * sv - st * stv) / det;
  for (const auto& [t, v] : pts) {
    const double resid = v - (fit.slope * t + fit.intercept);
    fit.max_violation = std::max(fit.max_violation, resid);
  }
  return fit;
}

}  // namespace coralsim
