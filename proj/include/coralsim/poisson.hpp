/// @file poisson.hpp
/// @brief Elliptic solves on the grid: the cell-centered Poisson problem for
///        pressure, screened (Helmholtz) solves for implicit diffusion and
///        viscosity, and the staggered vector Laplacian they share.
///
/// Two backends:
///  - SpectralPeriodic: FFT diagonalization with the exact discrete symbol
///    lambda_k = sum_a (4/h_a^2) sin^2(pi k_a / n_a); periodic grids only.
///    Solutions are exact up to transform round-off.
///  - ConjugateGradientNeumann: matrix-free CG on the same stencils; works
///    under both boundary modes. Singular problems (Poisson) are solved on
///    the zero-mean subspace; screened solves split off the mean exactly so
///    mass and max principles survive at round-off rather than at solver
///    tolerance.
///
/// Every solver instance owns its scratch buffers and FFT plans, so distinct
/// instances are safe to use concurrently. FFTW plan creation/destruction is
/// serialized through one global mutex (the FFTW planner is not thread-safe).

#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "coralsim/grid.hpp"

namespace coralsim {

enum class PoissonMethod {
  SpectralPeriodic,
  ConjugateGradientNeumann,
};

/// Thrown when an iterative solve exhausts max_iter above tolerance.
struct SolverFailure : std::runtime_error {
  /// Tag for the constructor that takes an already-formatted message.
  struct Verbatim {};

  double residual;
  int iterations;
  SolverFailure(const std::string& what, double res, int iters)
      : std::runtime_error(what + " (residual " + std::to_string(res) + " after " +
                           std::to_string(iters) + " iterations)"),
        residual(res),
        iterations(iters) {}
  SolverFailure(Verbatim, const std::string& what, double res, int iters)
      : std::runtime_error(what), residual(res), iterations(iters) {}
};

// ===========================================================================
// Staggered vector Laplacian
// ===========================================================================

namespace detail {

/// Apply the component Laplacian of a face-staggered field for component `a`.
/// Box mode: wall-normal entries are pinned (rows act as zero — they carry
/// no-slip zeros by convention), own-axis neighbors use stored wall values,
/// and tangential wall ghosts mirror with a sign flip (u_ghost = -u) so the
/// interpolated wall velocity vanishes. Periodic mode wraps.
inline void mac_laplacian_component_into(const Grid& g, int a,
                                         const std::vector<double>& in,
                                         std::vector<double>& out) {
  const auto fs = g.face_shape(a);
  out.assign(in.size(), 0.0);
  for (int b = 0; b < g.dim; ++b) {
    const double inv_h2 = 1.0 / (g.spacing[b] * g.spacing[b]);
    const int nb = fs[b];
    for (int k = 0; k < fs[2]; ++k)
      for (int j = 0; j < fs[1]; ++j)
        for (int i = 0; i < fs[0]; ++i) {
          const int cb = (b == 0 ? i : b == 1 ? j : k);
          const int idx = (k * fs[1] + j) * fs[0] + i;
          if (g.bc == BcMode::Box && b == a && (cb == 0 || cb == nb - 1)) {
            // wall-normal entry: pinned row
            continue;
          }
          const double ctr = in[idx];
          double lo, hi;
          auto at = [&](int bb) {
            int ii = i, jj = j, kk = k;
            (b == 0 ? ii : b == 1 ? jj : kk) = bb;
            return in[(kk * fs[1] + jj) * fs[0] + ii];
          };
          if (g.bc == BcMode::Periodic) {
            lo = at((cb - 1 + nb) % nb);
            hi = at((cb + 1) % nb);
          } else if (b == a) {
            // own axis: walls are stored entries (held at zero)
            lo = at(cb - 1);
            hi = at(cb + 1);
          } else {
            // tangential axis: no-slip ghost = -interior value
            lo = (cb == 0) ? -ctr : at(cb - 1);
            hi = (cb == nb - 1) ? -ctr : at(cb + 1);
          }
          out[idx] += (hi - 2.0 * ctr + lo) * inv_h2;
        }
  }
  if (g.bc == BcMode::Box) {
    // zero the pinned rows explicitly (the b != a sweeps above touched them)
    const int na = fs[a];
    for (int k = 0; k < fs[2]; ++k)
      for (int j = 0; j < fs[1]; ++j)
        for (int i = 0; i < fs[0]; ++i) {
          const int ca = (a == 0 ? i : a == 1 ? j : k);
          if (ca == 0 || ca == na - 1) out[(k * fs[1] + j) * fs[0] + i] = 0.0;
        }
  }
}

}  // namespace detail

/// Componentwise Laplacian of a staggered velocity field under the grid's
/// boundary conventions (no-slip walls in Box mode, wrap in Periodic).
inline VectorField mac_laplacian(const VectorField& u) {
  VectorField out(u.grid);
  for (int a = 0; a < u.grid.dim; ++a)
    detail::mac_laplacian_component_into(u.grid, a, u.comp[a], out.comp[a]);
  return out;
}

// ===========================================================================
// Solver
// ===========================================================================

class PoissonSolver {
 public:
  PoissonSolver(const Grid& grid, PoissonMethod method, double tol = 1e-10,
                int max_iter = 20000)
      : grid_(grid), method_(method), tol_(tol), max_iter_(max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("PoissonSolver: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("PoissonSolver: max_iter must be >= 1");
    if (method == PoissonMethod::SpectralPeriodic && grid.bc != BcMode::Periodic)
      throw std::invalid_argument(
          "PoissonSolver: SpectralPeriodic requires a periodic grid");
    if (method == PoissonMethod::SpectralPeriodic) init_fft();
  }

  ~PoissonSolver() { destroy_fft(); }
  PoissonSolver(const PoissonSolver&) = delete;
  PoissonSolver& operator=(const PoissonSolver&) = delete;

  const Grid& grid() const { return grid_; }
  PoissonMethod method() const { return method_; }
  double tol() const { return tol_; }

  /// Solve laplacian(q) = rhs for the mean-zero q. The rhs must be discretely
  /// compatible (zero mean up to round-off); its mean component is projected
  /// out. CG stops at ||r||_2 <= tol * min(1 + ||rhs||_2, 5), so the residual
  /// max-norm is also bounded by 5 * tol for moderate data; very large rhs
  /// (||rhs||_2 > 5e3 * tol relative floor) is solved to the double-precision
  /// relative floor 1e-13 * ||rhs||_2 instead, still within tol * (1 + ||rhs||_2).
  ScalarField solve_poisson(const ScalarField& rhs) {
    require_grid(rhs.grid);
    if (method_ == PoissonMethod::SpectralPeriodic)
      return spectral_solve(rhs, SpectralOp::InverseLaplacian, 0.0);
    ScalarField b = rhs;
    remove_mean(b.v);
    const double nb = norm2(b.v);
    ScalarField q(grid_);
    if (nb == 0.0) return q;
    const double target =
        std::max(tol_ * std::min(1.0 + norm2(rhs.v), 5.0), 1e-13 * nb);
    // CG on -laplacian (positive semidefinite; iterates stay mean-free)
    cg(b.v, q.v, target,
       [&](const std::vector<double>& x, std::vector<double>& out) {
         map_cells(x, scratch_in_);
         laplacian_into(scratch_in_, scratch_out_);
         for (size_t idx = 0; idx < out.size(); ++idx) out[idx] = -scratch_out_.v[idx];
       },
       "poisson");
    for (double& v : q.v) v = -v;  // solved (-L)(-q) = b
    remove_mean(q.v);
    return q;
  }

  /// Solve (I - coef * laplacian) x = rhs on cells. The mean is split off
  /// exactly (the operator fixes constants), so the integral of the solution
  /// matches the integral of the rhs to round-off.
  ScalarField solve_helmholtz_cells(const ScalarField& rhs, double coef) {
    require_grid(rhs.grid);
    if (!(coef >= 0.0))
      throw std::invalid_argument("solve_helmholtz_cells: coef must be >= 0");
    if (coef == 0.0) return rhs;
    if (method_ == PoissonMethod::SpectralPeriodic)
      return spectral_solve(rhs, SpectralOp::InverseHelmholtz, coef);
    const double mean = sum(rhs.v) / rhs.v.size();
    ScalarField b = rhs;
    for (double& v : b.v) v -= mean;
    ScalarField x(grid_);
    const double nb = norm2(b.v);
    if (nb > 0.0) {
      cg(b.v, x.v, tol_ * nb,
         [&](const std::vector<double>& p, std::vector<double>& out) {
           map_cells(p, scratch_in_);
           laplacian_into(scratch_in_, scratch_out_);
           for (size_t idx = 0; idx < out.size(); ++idx)
             out[idx] = p[idx] - coef * scratch_out_.v[idx];
         },
         "helmholtz_cells");
    }
    for (double& v : x.v) v += mean;
    return x;
  }

  /// Solve (I - coef * mac_laplacian) w = rhs componentwise on faces. In Box
  /// mode wall-normal rows are pinned identities; with zero wall rhs (the
  /// no-slip convention) the solution keeps exact zeros there.
  VectorField solve_helmholtz_faces(const VectorField& rhs, double coef) {
    require_grid(rhs.grid);
    if (!(coef >= 0.0))
      throw std::invalid_argument("solve_helmholtz_faces: coef must be >= 0");
    if (coef == 0.0) return rhs;
    VectorField x(grid_);
    for (int a = 0; a < grid_.dim; ++a) {
      if (method_ == PoissonMethod::SpectralPeriodic) {
        spectral_faces(rhs.comp[a], x.comp[a], coef);
        continue;
      }
      const double nb = norm2(rhs.comp[a]);
      if (nb == 0.0) continue;
      if (grid_.bc == BcMode::Box) require_zero_walls(rhs, a);
      cg(rhs.comp[a], x.comp[a], tol_ * nb,
         [&](const std::vector<double>& p, std::vector<double>& out) {
           detail::mac_laplacian_component_into(grid_, a, p, face_scratch_);
           for (size_t idx = 0; idx < out.size(); ++idx)
             out[idx] = p[idx] - coef * face_scratch_[idx];
         },
         "helmholtz_faces");
    }
    return x;
  }

 private:
  enum class SpectralOp { InverseLaplacian, InverseHelmholtz };

  Grid grid_;
  PoissonMethod method_;
  double tol_;
  int max_iter_;

  // CG scratch (sized lazily; cells and faces use separate buffers)
  std::vector<double> r_, p_, ap_;
  ScalarField scratch_in_, scratch_out_;
  std::vector<double> face_scratch_;

  // FFT resources (spectral method only)
  fftw_complex* fft_buf_ = nullptr;
  fftw_plan plan_fwd_ = nullptr;
  fftw_plan plan_bwd_ = nullptr;

  static std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
  }

  void init_fft() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    const int n = grid_.cells();
    fft_buf_ = fftw_alloc_complex(n);
    // storage is (k*ny + j)*nx + i, i.e. row-major with dims {nz, ny, nx}
    plan_fwd_ = fftw_plan_dft_3d(grid_.shape[2], grid_.shape[1], grid_.shape[0],
                                 fft_buf_, fft_buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_3d(grid_.shape[2], grid_.shape[1], grid_.shape[0],
                                 fft_buf_, fft_buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_bwd_)
      throw std::runtime_error("PoissonSolver: FFT plan creation failed");
  }

  void destroy_fft() {
    if (!fft_buf_) return;
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan_fwd_);
    fftw_destroy_plan(plan_bwd_);
    fftw_free(fft_buf_);
    fft_buf_ = nullptr;
  }

  void require_grid(const Grid& g) const {
    if (g != grid_)
      throw std::invalid_argument("PoissonSolver: field grid does not match solver grid");
  }

  /// The pinned wall-normal rows are identities, so CG stays on the interior
  /// subspace only if the wall entries of the rhs are exactly zero (the
  /// no-slip storage convention).
  void require_zero_walls(const VectorField& rhs, int a) const {
    const auto fs = grid_.face_shape(a);
    for (int k = 0; k < fs[2]; ++k)
      for (int j = 0; j < fs[1]; ++j)
        for (int i = 0; i < fs[0]; ++i) {
          const int ca = (a == 0 ? i : a == 1 ? j : k);
          if ((ca == 0 || ca == fs[a] - 1) &&
              rhs.comp[a][(k * fs[1] + j) * fs[0] + i] != 0.0)
            throw std::invalid_argument(
                "solve_helmholtz_faces: nonzero rhs on a pinned wall face");
        }
  }

  /// Discrete symbol of -laplacian for mode (kx, ky, kz).
  double symbol(int kx, int ky, int kz) const {
    const int kk[3] = {kx, ky, kz};
    double lam = 0.0;
    for (int a = 0; a < grid_.dim; ++a) {
      const double s = std::sin(M_PI * kk[a] / grid_.shape[a]);
      lam += 4.0 / (grid_.spacing[a] * grid_.spacing[a]) * s * s;
    }
    return lam;
  }

  template <class Scale>
  void spectral_apply(const std::vector<double>& in, std::vector<double>& out,
                      Scale&& scale) {
    const int n = grid_.cells();
    for (int idx = 0; idx < n; ++idx) {
      fft_buf_[idx][0] = in[idx];
      fft_buf_[idx][1] = 0.0;
    }
    fftw_execute(plan_fwd_);
    int idx = 0;
    for (int kz = 0; kz < grid_.shape[2]; ++kz)
      for (int ky = 0; ky < grid_.shape[1]; ++ky)
        for (int kx = 0; kx < grid_.shape[0]; ++kx, ++idx) {
          const double f = scale(symbol(kx, ky, kz));
          fft_buf_[idx][0] *= f;
          fft_buf_[idx][1] *= f;
        }
    fftw_execute(plan_bwd_);
    out.resize(n);
    const double inv_n = 1.0 / n;
    for (int i = 0; i < n; ++i) out[i] = fft_buf_[i][0] * inv_n;
  }

  ScalarField spectral_solve(const ScalarField& rhs, SpectralOp op, double coef) {
    ScalarField q(grid_);
    if (op == SpectralOp::InverseLaplacian) {
      spectral_apply(rhs.v, q.v,
                     [](double lam) { return lam == 0.0 ? 0.0 : -1.0 / lam; });
    } else {
      spectral_apply(rhs.v, q.v,
                     [coef](double lam) { return 1.0 / (1.0 + coef * lam); });
    }
    return q;
  }

  void spectral_faces(const std::vector<double>& in, std::vector<double>& out,
                      double coef) {
    // periodic face lattices have cell shape, and the staggered component
    // Laplacian is shift-invariant with the same symbol
    spectral_apply(in, out, [coef](double lam) { return 1.0 / (1.0 + coef * lam); });
  }

  void map_cells(const std::vector<double>& x, ScalarField& f) {
    if (f.grid != grid_) f = ScalarField(grid_);
    f.v = x;
  }

  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  static double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  static void remove_mean(std::vector<double>& v) {
    const double m = sum(v) / v.size();
    for (double& x : v) x -= m;
  }
  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

  /// Plain conjugate gradients on an SPD operator, stopping at
  /// ||r||_2 <= target. Throws SolverFailure past max_iter.
  template <class Apply>
  void cg(const std::vector<double>& b, std::vector<double>& x, double target,
          Apply&& apply, const char* what) {
    const size_t n = b.size();
    x.assign(n, 0.0);
    r_ = b;
    double rr = dot(r_, r_);
    if (std::sqrt(rr) <= target) return;
    p_ = r_;
    ap_.assign(n, 0.0);
    for (int it = 0; it < max_iter_; ++it) {
      apply(p_, ap_);
      const double pap = dot(p_, ap_);
      if (!(pap > 0.0))
        throw SolverFailure(std::string("cg[") + what + "]: operator lost definiteness",
                            std::sqrt(rr), it);
      const double alpha = rr / pap;
      for (size_t i = 0; i < n; ++i) x[i] += alpha * p_[i];
      for (size_t i = 0; i < n; ++i) r_[i] -= alpha * ap_[i];
      const double rr_new = dot(r_, r_);
      if (std::sqrt(rr_new) <= target) return;
      const double beta = rr_new / rr;
      rr = rr_new;
      for (size_t i = 0; i < n; ++i) p_[i] = r_[i] + beta * p_[i];
    }
    throw SolverFailure(std::string("cg[") + what + "]: no convergence",
                        std::sqrt(rr), max_iter_);
  }
};

}  // namespace coralsim
