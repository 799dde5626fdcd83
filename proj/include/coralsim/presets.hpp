/// @file presets.hpp
/// @brief Deterministic initial-data presets. Every preset produces
///        nonnegative scalars (with a strictly positive background floor for
///        the structured ones) and a velocity that is projected to the
///        discrete divergence-free subspace before it is returned.
///
/// All randomness flows through the preset's single seed; repeated calls are
/// bitwise identical.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "coralsim/fluid.hpp"
#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"

namespace coralsim {

struct Preset {
  enum class Kind { HomogeneousPair, GaussianBlobs, RandomSmooth };
  Kind kind = Kind::GaussianBlobs;
  // HomogeneousPair levels
  double n0 = 1.0, m0 = 1.0, c0 = 0.0;
  // structured presets
  double floor = 0.05;      ///< positive background under blobs / noise
  double amplitude = 2.0;   ///< peak height above the floor
  double swirl = 0.2;       ///< initial velocity scale (0 disables)
  uint64_t seed = 12345;    ///< RandomSmooth draws

  void validate() const {
    if (kind == Kind::HomogeneousPair) {
      if (n0 < 0.0 || m0 < 0.0 || c0 < 0.0)
        throw std::invalid_argument("Preset: homogeneous levels must be >= 0");
    } else {
      if (!(floor > 0.0))
        throw std::invalid_argument("Preset: floor must be > 0");
      if (amplitude < 0.0)
        throw std::invalid_argument("Preset: amplitude must be >= 0");
    }
  }
};

namespace detail {

/// Stream-function velocity: u = (d psi / dy, -d psi / dx [, 0]) with
/// psi = swirl * sin(2 pi x / Lx) sin(2 pi y / Ly) * (3D: cos(pi z / Lz)).
/// Normal components vanish on every wall, so the field is admissible in
/// both boundary modes before projection.
inline VectorField swirl_velocity(const Grid& g, double swirl) {
  VectorField u(g);
  if (swirl == 0.0) return u;
  const double wx = 2.0 * M_PI / g.extent[0];
  const double wy = 2.0 * M_PI / g.extent[1];
  const double wz = g.dim == 3 ? M_PI / g.extent[2] : 0.0;
  auto psi_dy = [&](const std::array<double, 3>& x) {
    double v = swirl * std::sin(wx * x[0]) * wy * std::cos(wy * x[1]);
    if (g.dim == 3) v *= std::cos(wz * x[2]);
    return v;
  };
  auto psi_dx = [&](const std::array<double, 3>& x) {
    double v = swirl * wx * std::cos(wx * x[0]) * std::sin(wy * x[1]);
    if (g.dim == 3) v *= std::cos(wz * x[2]);
    return v;
  };
  for_faces(g, 0, [&](int i, int j, int k) {
    u.face(0, i, j, k) = psi_dy(g.face_center(0, i, j, k));
  });
  for_faces(g, 1, [&](int i, int j, int k) {
    u.face(1, i, j, k) = -psi_dx(g.face_center(1, i, j, k));
  });
  // component 2 (3D) stays zero
  if (g.bc == BcMode::Box) {
    // enforce exact wall zeros against trig round-off
    for (int a = 0; a < g.dim; ++a)
      for_faces(g, a, [&](int i, int j, int k) {
        const int fa = (a == 0 ? i : a == 1 ? j : k);
        if (fa == 0 || fa == g.shape[a]) u.face(a, i, j, k) = 0.0;
      });
  }
  return u;
}

/// Gaussian bump centered at fractional position `frac` of the box, width
/// 0.15 of each extent.
inline double bump(const Grid& g, const std::array<double, 3>& x, double frac) {
  double e = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    const double d = (x[a] - frac * g.extent[a]) / (0.15 * g.extent[a]);
    e += d * d;
  }
  return std::exp(-0.5 * e);
}

/// Low-mode random field normalized to [0, 1]. Box mode uses cosines with
/// zero wall-normal derivative; periodic mode uses phased cosines.
inline ScalarField random_unit_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  struct Mode {
    std::array<int, 3> k;
    double a;
    std::array<double, 3> ph;
  };
  std::vector<Mode> modes;
  const int kmax = 2;
  std::array<int, 3> k{0, 0, 0};
  for (k[0] = 0; k[0] <= kmax; ++k[0])
    for (k[1] = 0; k[1] <= kmax; ++k[1])
      for (k[2] = 0; k[2] <= (g.dim == 3 ? kmax : 0); ++k[2]) {
        if (k[0] + k[1] + k[2] == 0) continue;
        Mode m;
        m.k = k;
        m.a = amp(rng) / (1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        for (int a = 0; a < 3; ++a)
          m.ph[a] = g.bc == BcMode::Periodic ? phase(rng) : 0.0;
        modes.push_back(m);
      }
  ScalarField f(g);
  const double trig_scale = g.bc == BcMode::Periodic ? 2.0 * M_PI : M_PI;
  detail::for_cells(g, [&](int i, int j, int kk) {
    const auto x = g.cell_center(i, j, kk);
    double s = 0.0;
    for (const Mode& m : modes) {
      double term = m.a;
      for (int a = 0; a < g.dim; ++a)
        term *= std::cos(trig_scale * m.k[a] * x[a] / g.extent[a] + m.ph[a]);
      s += term;
    }
    f.at(i, j, kk) = s;
  });
  double lo = f.v[0], hi = f.v[0];
  for (double v : f.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  for (double& v : f.v) v = span > 0.0 ? (v - lo) / span : 0.5;
  return f;
}

}  // namespace detail

/// Build the initial state for a preset, projecting the velocity through the
/// supplied solver. Deterministic: bitwise identical for identical inputs.
inline SimState make_initial_state(const Grid& grid, const Preset& preset,
                                   PoissonSolver& solver) {
  preset.validate();
  SimState st(grid);
  switch (preset.kind) {
    case Preset::Kind::HomogeneousPair: {
      std::fill(st.n.v.begin(), st.n.v.end(), preset.n0);
      std::fill(st.m.v.begin(), st.m.v.end(), preset.m0);
      std::fill(st.c.v.begin(), st.c.v.end(), preset.c0);
      // u stays exactly zero; nothing to project
      return st;
    }
    case Preset::Kind::GaussianBlobs: {
      detail::for_cells(grid, [&](int i, int j, int k) {
        const auto x = grid.cell_center(i, j, k);
        st.n.at(i, j, k) = preset.floor + preset.amplitude * detail::bump(grid, x, 0.35);
        st.m.at(i, j, k) = preset.floor + preset.amplitude * detail::bump(grid, x, 0.65);
        st.c.at(i, j, k) =
            0.1 * preset.floor + 0.2 * preset.amplitude * detail::bump(grid, x, 0.65);
      });
      st.u = detail::swirl_velocity(grid, preset.swirl);
      break;
    }
    case Preset::Kind::RandomSmooth: {
      std::mt19937_64 rng(preset.seed);
      ScalarField gn = detail::random_unit_field(grid, rng);
      ScalarField gm = detail::random_unit_field(grid, rng);
      ScalarField gc = detail::random_unit_field(grid, rng);
      for (size_t idx = 0; idx < st.n.v.size(); ++idx) {
        st.n.v[idx] = preset.floor + preset.amplitude * gn.v[idx];
        st.m.v[idx] = preset.floor + preset.amplitude * gm.v[idx];
        st.c.v[idx] = 0.1 * preset.floor + 0.25 * preset.amplitude * gc.v[idx];
      }
      std::uniform_real_distribution<double> swirl_jitter(0.5, 1.0);
      st.u = detail::swirl_velocity(grid, preset.swirl * swirl_jitter(rng));
      break;
    }
  }
  if (preset.swirl != 0.0) st.u = project(st.u, solver).u;
  return st;
}

/// Convenience overload constructing a matching solver internally.
inline SimState make_initial_state(const Grid& grid, const Preset& preset) {
  PoissonSolver solver(grid, grid.bc == BcMode::Periodic
                                 ? PoissonMethod::SpectralPeriodic
                                 : PoissonMethod::ConjugateGradientNeumann);
  return make_initial_state(grid, preset, solver);
}

}  // namespace coralsim
