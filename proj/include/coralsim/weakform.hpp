/// @file weakform.hpp
/// @brief Weak-solution certificates: smooth space-time test functions and
///        the four integral residuals (n, c, m, u) evaluated on a stored
///        trajectory.
///
/// A test function is a separable product phi(x, t) = phi_s(x) * theta(t),
/// where theta is 1 on [0, 0.9 T] and tapers smoothly (cubic) to 0 at T, so
/// no terminal boundary term appears. Spatial parts are evaluated
/// analytically and sampled at cell/face centers. In time, the spatial
/// pairings are evaluated at the stored snapshots and interpolated linearly
/// across each slab, while theta and theta' are integrated against the slab's
/// interpolation hats exactly (piecewise Gauss split at the taper knee); the
/// time quadrature therefore resolves the taper regardless of snapshot
/// spacing. For each equation the residual is the signed sum of its integral
/// terms, which vanishes (to discretization order) when the trajectory solves
/// the system; the reported scale is the sum of the terms' magnitudes, giving
/// a meaningful relative residual.
///
/// Velocity test fields are built from stream functions (2D) or a vector
/// potential (3D), hence exactly divergence-free; raw separable fields are
/// accepted by the type but rejected at evaluation time by an analytic
/// divergence sample — the velocity identity only holds against solenoidal
/// test fields.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "coralsim/diagnostics.hpp"
#include "coralsim/fluid.hpp"
#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"
#include "coralsim/stepper.hpp"

namespace coralsim {

// ===========================================================================
// Scalar test functions
// ===========================================================================

struct TestFunction {
  enum class Kind {
    ConstantInSpace,  ///< phi_s == 1 (mass-balance certificate)
    Polynomial,       ///< product of (4 s (1-s))^(k+1) bumps (periodic: raised cosine)
    SeparableCosine,  ///< product of cos(k pi s) (periodic: cos(2 pi k s))
  };
  Kind kind = Kind::SeparableCosine;
  std::array<int, 3> k{1, 1, 1};  ///< per-axis order / frequency, >= 0

  void validate(const Grid& g) const {
    if (kind == Kind::ConstantInSpace) return;
    for (int a = 0; a < g.dim; ++a)
      if (k[a] < 0)
        throw std::invalid_argument("TestFunction: orders must be >= 0");
  }

  /// phi_s and its first derivative along each axis, at a physical point.
  double value(const Grid& g, const std::array<double, 3>& x) const {
    if (kind == Kind::ConstantInSpace) return 1.0;
    double v = 1.0;
    for (int a = 0; a < g.dim; ++a) v *= profile(g, a, x[a] / g.extent[a]).f;
    return v;
  }
  std::array<double, 3> grad(const Grid& g, const std::array<double, 3>& x) const {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    if (kind == Kind::ConstantInSpace) return out;
    std::array<double, 3> f{1.0, 1.0, 1.0}, d{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim; ++a) {
      const auto p = profile(g, a, x[a] / g.extent[a]);
      f[a] = p.f;
      d[a] = p.d1 / g.extent[a];
    }
    for (int a = 0; a < g.dim; ++a) {
      out[a] = d[a];
      for (int b = 0; b < g.dim; ++b)
        if (b != a) out[a] *= f[b];
    }
    return out;
  }

 private:
  struct P {
    double f, d1;
  };
  P profile(const Grid& g, int a, double s) const {
    if (kind == Kind::SeparableCosine) {
      const double w =
          (g.bc == BcMode::Box ? M_PI : 2.0 * M_PI) * static_cast<double>(k[a]);
      return {std::cos(w * s), -w * std::sin(w * s)};
    }
    // Polynomial: bump^(k+1), with the bump 4s(1-s) on a box and the raised
    // cosine (1 - cos 2 pi s)/2 on a torus
    const double q = static_cast<double>(k[a] + 1);
    double b, db;
    if (g.bc == BcMode::Box) {
      b = 4.0 * s * (1.0 - s);
      db = 4.0 * (1.0 - 2.0 * s);
    } else {
      b = 0.5 - 0.5 * std::cos(2.0 * M_PI * s);
      db = M_PI * std::sin(2.0 * M_PI * s);
    }
    const double bq1 = std::pow(std::abs(b), q - 1.0);
    return {bq1 * b, q * bq1 * db};
  }
};

// ===========================================================================
// Solenoidal velocity test fields
// ===========================================================================

struct VectorTestFunction {
  enum class Kind {
    Stream,        ///< curl of a stream function / vector potential: solenoidal
    RawSeparable,  ///< per-component cosine product: generally NOT solenoidal
  };
  Kind kind = Kind::Stream;
  std::array<int, 3> k{1, 1, 1};
  std::array<double, 3> amplitude{1.0, 1.0, 0.0};  ///< RawSeparable only

  void validate(const Grid& g) const {
    if (kind == Kind::Stream) {
      if (k[0] < 1 || k[1] < 1)
        throw std::invalid_argument(
            "VectorTestFunction: stream orders k[0], k[1] must be >= 1");
      if (g.dim == 3 && k[2] < 0)
        throw std::invalid_argument("VectorTestFunction: k[2] must be >= 0");
    }
  }

  std::array<double, 3> value(const Grid& g, const std::array<double, 3>& x) const {
    if (kind == Kind::RawSeparable) return raw_value(g, x);
    const auto [X, Y, Z] = axis_profiles(g, x);
    // phi = curl (0, 0, psi * chi) with psi = X(x) Y(y), chi = Z(z)
    return {X.f * Y.d1 / g.extent[1] * Z.f, -X.d1 / g.extent[0] * Y.f * Z.f, 0.0};
  }

  /// J[i][j] = d phi_i / d x_j (rows beyond phi_2 are zero by construction).
  std::array<std::array<double, 3>, 3> jacobian(
      const Grid& g, const std::array<double, 3>& x) const {
    std::array<std::array<double, 3>, 3> J{};
    if (kind == Kind::RawSeparable) {
      raw_jacobian(g, x, J);
      return J;
    }
    const auto [X, Y, Z] = axis_profiles(g, x);
    const double Lx = g.extent[0], Ly = g.extent[1], Lz = g.extent[2];
    J[0][0] = X.d1 * Y.d1 * Z.f / (Lx * Ly);
    J[0][1] = X.f * Y.d2 * Z.f / (Ly * Ly);
    J[1][0] = -X.d2 * Y.f * Z.f / (Lx * Lx);
    J[1][1] = -X.d1 * Y.d1 * Z.f / (Lx * Ly);
    if (g.dim == 3) {
      J[0][2] = X.f * Y.d1 * Z.d1 / (Ly * Lz);
      J[1][2] = -X.d1 * Y.f * Z.d1 / (Lx * Lz);
    }
    return J;
  }

  double divergence_at(const Grid& g, const std::array<double, 3>& x) const {
    const auto J = jacobian(g, x);
    double d = 0.0;
    for (int a = 0; a < g.dim; ++a) d += J[a][a];
    return d;
  }

 private:
  struct P {
    double f, d1, d2;
  };
  /// Per-axis profile with two derivatives (in the unit variable s).
  P stream_profile(const Grid& g, int a, double s) const {
    if (g.bc == BcMode::Periodic) {
      if (a == 2) {  // chi: cosine cap, constant for k = 0
        const double w = 2.0 * M_PI * static_cast<double>(k[2]);
        return {std::cos(w * s), -w * std::sin(w * s), -w * w * std::cos(w * s)};
      }
      const double w = 2.0 * M_PI * static_cast<double>(k[a]);
      return {std::sin(w * s), w * std::cos(w * s), -w * w * std::sin(w * s)};
    }
    // box: (4 s (1-s))^q, q >= 2 on the stream axes so the curl vanishes on
    // every wall; q >= 1 suffices for the cap axis (no z-derivative of chi
    // enters a nonzero component)
    const double q = static_cast<double>(k[a] + 1);
    const double b = 4.0 * s * (1.0 - s);
    const double db = 4.0 * (1.0 - 2.0 * s);
    const double ddb = -8.0;
    const double ab = std::abs(b);
    const double bq1 = std::pow(ab, q - 1.0);
    const double bq2 = q >= 2.0 ? std::pow(ab, q - 2.0) : 0.0;
    return {bq1 * b, q * bq1 * db, q * (q - 1.0) * bq2 * db * db + q * bq1 * ddb};
  }
  std::tuple<P, P, P> axis_profiles(const Grid& g,
                                    const std::array<double, 3>& x) const {
    const P X = stream_profile(g, 0, x[0] / g.extent[0]);
    const P Y = stream_profile(g, 1, x[1] / g.extent[1]);
    const P Z = g.dim == 3 ? stream_profile(g, 2, x[2] / g.extent[2])
                           : P{1.0, 0.0, 0.0};
    return {X, Y, Z};
  }
  P raw_profile(const Grid& g, int a, double s) const {
    const double w =
        (g.bc == BcMode::Box ? M_PI : 2.0 * M_PI) * static_cast<double>(k[a]);
    return {std::cos(w * s), -w * std::sin(w * s), -w * w * std::cos(w * s)};
  }
  std::array<double, 3> raw_value(const Grid& g,
                                  const std::array<double, 3>& x) const {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    double prod = 1.0;
    for (int a = 0; a < g.dim; ++a)
      prod *= raw_profile(g, a, x[a] / g.extent[a]).f;
    for (int a = 0; a < g.dim; ++a) out[a] = amplitude[a] * prod;
    return out;
  }
  void raw_jacobian(const Grid& g, const std::array<double, 3>& x,
                    std::array<std::array<double, 3>, 3>& J) const {
    std::array<double, 3> f{1.0, 1.0, 1.0}, d{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim; ++a) {
      const P p = raw_profile(g, a, x[a] / g.extent[a]);
      f[a] = p.f;
      d[a] = p.d1 / g.extent[a];
    }
    for (int i = 0; i < g.dim; ++i)
      for (int j = 0; j < g.dim; ++j) {
        double v = amplitude[i] * d[j];
        for (int b = 0; b < g.dim; ++b)
          if (b != j) v *= f[b];
        J[i][j] = v;
      }
  }
};

// ===========================================================================
// Residuals
// ===========================================================================

/// One evaluated weak identity: the signed sum of its terms and the sum of
/// their magnitudes (for a relative reading).
struct ResidualBreakdown {
  double residual = 0.0;
  double scale = 0.0;
  double relative() const { return std::abs(residual) / std::max(scale, 1e-300); }
};

namespace detail {

/// Temporal factor: 1 on [0, (1-frac) T], cubic smoothstep down to 0 at T.
struct Taper {
  double T;
  double frac = 0.1;
  double knee() const { return (1.0 - frac) * T; }
  double value(double t) const {
    if (t <= knee()) return 1.0;
    const double s = (T - t) / (frac * T);
    return s * s * (3.0 - 2.0 * s);
  }
  double deriv(double t) const {
    if (t <= knee()) return 0.0;
    const double s = (T - t) / (frac * T);
    return (6.0 * s - 6.0 * s * s) * (-1.0 / (frac * T));
  }
};

/// Exact integrals of the temporal factor against a slab's linear
/// interpolation hats: wa = int theta (b-t)/dt, wb = int theta (t-a)/dt over
/// [a, b], and va, vb likewise against theta'. The factor is piecewise cubic
/// with a single knee, so per-piece 3-point Gauss is exact; pairing values
/// sampled at the slab endpoints then integrate without any taper-resolution
/// error (a midpoint rule would need slabs much finer than the taper width).
struct SlabWeights {
  double wa = 0.0, wb = 0.0, va = 0.0, vb = 0.0;
};

inline SlabWeights slab_weights(const Taper& taper, double a, double b) {
  const double dt = b - a;
  SlabWeights w;
  auto piece = [&](double lo, double hi) {
    if (!(hi > lo)) return;
    static constexpr double xi[3] = {-0.7745966692414834, 0.0,
                                     0.7745966692414834};
    static constexpr double wt[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int q = 0; q < 3; ++q) {
      const double t = mid + half * xi[q];
      const double ww = half * wt[q];
      const double ha = (b - t) / dt, hb = (t - a) / dt;
      const double th = taper.value(t), thd = taper.deriv(t);
      w.wa += ww * th * ha;
      w.wb += ww * th * hb;
      w.va += ww * thd * ha;
      w.vb += ww * thd * hb;
    }
  };
  const double split = std::min(std::max(taper.knee(), a), b);
  piece(a, split);
  piece(split, b);
  return w;
}

inline void check_trajectory(const std::vector<SimState>& snaps, const char* who) {
  if (snaps.size() < 16)
    throw std::invalid_argument(std::string(who) +
                                ": need at least 16 snapshots for the time "
                                "quadrature");
  for (size_t i = 1; i < snaps.size(); ++i) {
    if (!(snaps[i].t > snaps[i - 1].t))
      throw std::invalid_argument(std::string(who) +
                                  ": snapshot times must strictly increase");
    require_same_grid(snaps[i].grid(), snaps[0].grid(), who);
  }
  if (!(snaps.back().t > 0.0))
    throw std::invalid_argument(std::string(who) + ": trajectory has zero span");
}

inline ScalarField sample_cells(const Grid& g, const TestFunction& f) {
  ScalarField out(g);
  for_cells(g, [&](int i, int j, int k) {
    out.at(i, j, k) = f.value(g, g.cell_center(i, j, k));
  });
  return out;
}

inline VectorField sample_grad_faces(const Grid& g, const TestFunction& f) {
  VectorField out(g);
  for (int a = 0; a < g.dim; ++a)
    for_faces(g, a, [&](int i, int j, int k) {
      out.face(a, i, j, k) = f.grad(g, g.face_center(a, i, j, k))[a];
    });
  return out;
}

inline VectorField sample_faces(const Grid& g, const VectorTestFunction& f) {
  VectorField out(g);
  for (int a = 0; a < g.dim; ++a)
    for_faces(g, a, [&](int i, int j, int k) {
      out.face(a, i, j, k) = f.value(g, g.face_center(a, i, j, k))[a];
    });
  return out;
}

/// \int f u . G dV with f averaged onto faces (wall faces carry u = 0).
inline double advective_pairing(const ScalarField& f, const VectorField& u,
                                const VectorField& G) {
  const Grid& g = f.grid;
  VectorField w(g);
  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    for_faces(g, a, [&](int i, int j, int k) {
      const int fa = (a == 0 ? i : a == 1 ? j : k);
      if (g.bc == BcMode::Box && (fa == 0 || fa == n_a)) return;
      int li = i, lj = j, lk = k;
      (a == 0 ? li : a == 1 ? lj : lk) = (fa - 1 + n_a) % n_a;
      int ri = i, rj = j, rk = k;
      (a == 0 ? ri : a == 1 ? rj : rk) = fa % n_a;
      const double fbar = 0.5 * (f.at(li, lj, lk) + f.at(ri, rj, rk));
      w.face(a, i, j, k) = fbar * u.face(a, i, j, k);
    });
  }
  return dot_faces(w, G);
}

/// Pointwise product integrated against a sampled test function.
inline double product_pairing(const ScalarField& a, const ScalarField& b,
                              const ScalarField& phi) {
  double s = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i] * phi.v[i];
  return s * a.grid.cell_volume();
}

/// Shared slab walk for the three scalar identities. `terms` receives the
/// time-accumulated integrals; signs are applied by the callers.
struct ScalarTerms {
  double time = 0.0;      ///< \int\int f phi_t
  double initial = 0.0;   ///< \int f(0) phi(0)
  double diffusion = 0.0; ///< \int\int grad f . grad phi
  double advect = 0.0;    ///< \int\int f u . grad phi
  double chemo = 0.0;     ///< \int\int f S grad c . grad phi   (n only)
  double reaction = 0.0;  ///< field-specific zeroth-order pairing
  double source = 0.0;    ///< \int\int m phi                   (c only)
};

enum class WeakField { N, C, M };

inline const ScalarField& pick(const SimState& s, WeakField w) {
  return w == WeakField::N ? s.n : w == WeakField::C ? s.c : s.m;
}

/// Spatial pairings of one snapshot against the sampled test function; the
/// slab walk interpolates these values linearly in time.
struct ScalarPairings {
  double mass = 0.0;
  double diffusion = 0.0;
  double advect = 0.0;
  double chemo = 0.0;
  double reaction = 0.0;
  double source = 0.0;
};

inline ScalarPairings scalar_pairings(const SimState& s,
                                      const ModelParams& raw, WeakField which,
                                      const ScalarField& P,
                                      const VectorField& G) {
  const ScalarField& f = pick(s, which);
  ScalarPairings out;
  out.mass = dot_cells(f, P);
  out.diffusion = dot_faces(gradient(f), G);
  out.advect = advective_pairing(f, s.u, G);
  switch (which) {
    case WeakField::N:
      out.chemo = dot_faces(regularized_flux(raw, s), G);
      out.reaction = product_pairing(f, s.m, P);
      break;
    case WeakField::C:
      out.reaction = dot_cells(f, P);
      out.source = dot_cells(s.m, P);
      break;
    case WeakField::M:
      out.reaction = product_pairing(s.n, f, P);
      break;
  }
  return out;
}

inline ScalarTerms scalar_terms(const std::vector<SimState>& snaps,
                                const ModelParams& params, WeakField which,
                                const TestFunction& tf) {
  const Grid& g = snaps[0].grid();
  tf.validate(g);
  const Taper taper{snaps.back().t};
  const ScalarField P = sample_cells(g, tf);
  const VectorField G = sample_grad_faces(g, tf);

  // the limit-system identity pairs the flux without regularization
  ModelParams raw = params;
  raw.epsilon = 0.0;
  raw.cutoff_margin = 0.0;

  ScalarTerms T;
  T.initial = taper.value(0.0) * dot_cells(pick(snaps[0], which), P);

  ScalarPairings prev = scalar_pairings(snaps[0], raw, which, P, G);
  for (size_t s = 0; s + 1 < snaps.size(); ++s) {
    const ScalarPairings next = scalar_pairings(snaps[s + 1], raw, which, P, G);
    const SlabWeights w = slab_weights(taper, snaps[s].t, snaps[s + 1].t);
    T.time += w.va * prev.mass + w.vb * next.mass;
    T.diffusion += w.wa * prev.diffusion + w.wb * next.diffusion;
    T.advect += w.wa * prev.advect + w.wb * next.advect;
    T.chemo += w.wa * prev.chemo + w.wb * next.chemo;
    T.reaction += w.wa * prev.reaction + w.wb * next.reaction;
    T.source += w.wa * prev.source + w.wb * next.source;
    prev = next;
  }
  return T;
}

}  // namespace detail

/// Weak identity for n:
///   -\int\int n phi_t - \int n0 phi(0) + \int\int grad n . grad phi
///   - \int\int n S grad c . grad phi - \int\int n u . grad phi
///   + \int\int n m phi  = 0.
inline ResidualBreakdown residual_n(const std::vector<SimState>& snaps,
                                    const ModelParams& params,
                                    const TestFunction& tf) {
  detail::check_trajectory(snaps, "residual_n");
  const auto T = detail::scalar_terms(snaps, params, detail::WeakField::N, tf);
  ResidualBreakdown r;
  r.residual =
      -T.time - T.initial + T.diffusion - T.chemo - T.advect + T.reaction;
  r.scale = std::abs(T.time) + std::abs(T.initial) + std::abs(T.diffusion) +
            std::abs(T.chemo) + std::abs(T.advect) + std::abs(T.reaction);
  return r;
}

/// Weak identity for c:
///   -\int\int c phi_t - \int c0 phi(0) + \int\int grad c . grad phi
///   + \int\int c phi - \int\int m phi - \int\int c u . grad phi = 0.
inline ResidualBreakdown residual_c(const std::vector<SimState>& snaps,
                                    const ModelParams& params,
                                    const TestFunction& tf) {
  detail::check_trajectory(snaps, "residual_c");
  const auto T = detail::scalar_terms(snaps, params, detail::WeakField::C, tf);
  ResidualBreakdown r;
  r.residual =
      -T.time - T.initial + T.diffusion + T.reaction - T.source - T.advect;
  r.scale = std::abs(T.time) + std::abs(T.initial) + std::abs(T.diffusion) +
            std::abs(T.reaction) + std::abs(T.source) + std::abs(T.advect);
  return r;
}

/// Weak identity for m:
///   -\int\int m phi_t - \int m0 phi(0) + \int\int grad m . grad phi
///   + \int\int n m phi - \int\int m u . grad phi = 0.
inline ResidualBreakdown residual_m(const std::vector<SimState>& snaps,
                                    const ModelParams& params,
                                    const TestFunction& tf) {
  detail::check_trajectory(snaps, "residual_m");
  const auto T = detail::scalar_terms(snaps, params, detail::WeakField::M, tf);
  ResidualBreakdown r;
  r.residual = -T.time - T.initial + T.diffusion + T.reaction - T.advect;
  r.scale = std::abs(T.time) + std::abs(T.initial) + std::abs(T.diffusion) +
            std::abs(T.reaction) + std::abs(T.advect);
  return r;
}

/// Weak identity for u against a solenoidal test field:
///   -\int\int u . phi_t - \int u0 . phi(0) - kappa \int\int u x u : grad phi
///   + \int\int grad u : grad phi - \int\int (n + m) grad Phi . phi = 0.
/// Throws std::invalid_argument if the test field is not divergence-free
/// (analytic divergence sampled at cell centers).
inline ResidualBreakdown residual_u(const std::vector<SimState>& snaps,
                                    const ModelParams& params,
                                    const VectorTestFunction& tf) {
  detail::check_trajectory(snaps, "residual_u");
  const Grid& g = snaps[0].grid();
  tf.validate(g);

  double max_div = 0.0, max_val = 0.0;
  detail::for_cells(g, [&](int i, int j, int k) {
    const auto x = g.cell_center(i, j, k);
    max_div = std::max(max_div, std::abs(tf.divergence_at(g, x)));
    const auto v = tf.value(g, x);
    for (int a = 0; a < g.dim; ++a) max_val = std::max(max_val, std::abs(v[a]));
  });
  if (max_div > 1e-10 * (1.0 + max_val))
    throw std::invalid_argument(
        "residual_u: test field is not divergence-free");

  const detail::Taper taper{snaps.back().t};
  const VectorField Phi = detail::sample_faces(g, tf);

  // Jacobian of the test field at cell centers, for the convective pairing
  std::vector<std::array<double, 9>> J(static_cast<size_t>(g.cells()));
  detail::for_cells(g, [&](int i, int j, int k) {
    const auto Jx = tf.jacobian(g, g.cell_center(i, j, k));
    auto& row = J[static_cast<size_t>(g.cell_index(i, j, k))];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) row[static_cast<size_t>(3 * r + c)] = Jx[r][c];
  });

  double t_time = 0.0, t_conv = 0.0, t_visc = 0.0, t_force = 0.0;
  const double t_init = taper.value(0.0) * dot_faces(snaps[0].u, Phi);

  struct Pair {
    double time = 0.0, conv = 0.0, visc = 0.0, force = 0.0;
  };
  auto pairings = [&](const SimState& s) {
    Pair out;
    out.time = dot_faces(s.u, Phi);
    out.visc = -dot_faces(mac_laplacian(s.u), Phi);
    // u x u : grad phi at cell centers (components face-averaged)
    std::array<std::vector<double>, 3> uc;
    for (int ax = 0; ax < g.dim; ++ax) {
      uc[ax].assign(static_cast<size_t>(g.cells()), 0.0);
      const int n_ax = g.shape[ax];
      detail::for_cells(g, [&](int i, int j, int k) {
        const double lo = s.u.face(ax, i, j, k);
        int ri = i, rj = j, rk = k;
        int& r = (ax == 0 ? ri : ax == 1 ? rj : rk);
        r = g.bc == BcMode::Box ? r + 1 : (r + 1) % n_ax;
        uc[ax][static_cast<size_t>(g.cell_index(i, j, k))] =
            0.5 * (lo + s.u.face(ax, ri, rj, rk));
      });
    }
    double sum = 0.0;
    for (size_t idx = 0; idx < J.size(); ++idx)
      for (int r = 0; r < g.dim; ++r)
        for (int c = 0; c < g.dim; ++c)
          sum += uc[r][idx] * uc[c][idx] * J[idx][static_cast<size_t>(3 * r + c)];
    out.conv = sum * g.cell_volume();
    out.force = dot_faces(buoyancy_force(params, s), Phi);
    return out;
  };

  Pair prev = pairings(snaps[0]);
  for (size_t s = 0; s + 1 < snaps.size(); ++s) {
    const Pair next = pairings(snaps[s + 1]);
    const detail::SlabWeights w =
        detail::slab_weights(taper, snaps[s].t, snaps[s + 1].t);
    t_time += w.va * prev.time + w.vb * next.time;
    t_visc += w.wa * prev.visc + w.wb * next.visc;
    t_conv += w.wa * prev.conv + w.wb * next.conv;
    t_force += w.wa * prev.force + w.wb * next.force;
    prev = next;
  }

  ResidualBreakdown r;
  r.residual =
      -t_time - t_init - params.kappa * t_conv + t_visc - t_force;
  r.scale = std::abs(t_time) + std::abs(t_init) +
            std::abs(params.kappa * t_conv) + std::abs(t_visc) +
            std::abs(t_force);
  return r;
}

}  // namespace coralsim
