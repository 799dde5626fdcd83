/// @file stepper.hpp
/// @brief Time integration: the adaptive step-size bound, one operator-split
///        step (advection, chemotaxis, implicit diffusion, reactions, fluid),
///        and the run loop with snapshot/record sinks.
///
/// Splitting order within one step of size dt:
///   1. advect n, c, m with the current velocity (conservative donor-cell
///      upwind by default; centered averaging as a comparison scheme),
///   2. apply the chemotactic flux divergence to n (explicit, centered),
///   3. diffuse n, c, m implicitly: (I - dt Lap) f_new = f,
///   4. react pointwise with unconditionally positive (Patankar) updates:
///        n <- n / (1 + dt m),  m <- m / (1 + dt n)   (old values on the RHS),
///        c <- (c + dt m_new) / (1 + dt),
///   5. advance the fluid (convection + buoyancy + implicit viscosity +
///      projection).
/// Every stage preserves nonnegativity except stage 2, whose centered flux
/// can undershoot near vacuum; the step-size bound caps its transport speed
/// and `clip_negatives` offers an optional hard floor (off by default).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coralsim/diagnostics.hpp"
#include "coralsim/fluid.hpp"
#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"

namespace coralsim {

// ===========================================================================
// Scheme
// ===========================================================================

enum class Advection {
  Upwind1,   ///< first-order donor-cell (monotone under the CFL bound)
  Central2,  ///< second-order centered face averaging (not monotone)
};

struct StepScheme {
  Advection advection = Advection::Upwind1;
  double dt_safety = 0.4;       ///< fraction of the stability bound to use
  bool clip_negatives = false;  ///< clamp scalars at 0 after each step

  void validate() const {
    if (!(dt_safety > 0.0 && dt_safety <= 1.0))
      throw std::invalid_argument("StepScheme: dt_safety must lie in (0, 1]");
  }
};

// ===========================================================================
// Step-size bound
// ===========================================================================

/// Largest admissible dt at this state: dt_safety times the reciprocal of the
/// fastest rate among
///   advection   sum_a max|u_a| / h_a,
///   chemotaxis  sum_a max speed_a / h_a,
///   reaction    sup n + sup m + 1.
/// Diffusion and viscosity are implicit and impose no bound. With all fields
/// zero the reaction rate is 1 and the bound is exactly dt_safety.
inline double stable_dt(const SimState& st, const ModelParams& params,
                        const StepScheme& scheme) {
  const Grid& g = st.grid();
  double adv_rate = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    double mx = 0.0;
    for (double v : st.u.comp[a]) mx = std::max(mx, std::abs(v));
    adv_rate += mx / g.spacing[a];
  }
  const auto chem = chemotactic_speed_max(params, st);
  double chem_rate = 0.0;
  for (int a = 0; a < g.dim; ++a) chem_rate += chem[a] / g.spacing[a];
  double sup_n = 0.0, sup_m = 0.0;
  for (double v : st.n.v) sup_n = std::max(sup_n, std::abs(v));
  for (double v : st.m.v) sup_m = std::max(sup_m, std::abs(v));
  const double react_rate = sup_n + sup_m + 1.0;
  const double rate = std::max({adv_rate, chem_rate, react_rate});
  return scheme.dt_safety / rate;
}

// ===========================================================================
// One step
// ===========================================================================

namespace detail {

/// Conservative advective update f -= dt * div(u * f_face), with f_face the
/// donor-cell (upwind) or centered face value. Box wall faces carry u = 0 and
/// contribute nothing, so the cell sum of f is preserved exactly up to
/// rounding in both boundary modes.
inline void advect_scalar(ScalarField& f, const VectorField& u, double dt,
                          Advection mode) {
  const Grid& g = f.grid;
  VectorField flux(g);
  for (int a = 0; a < g.dim; ++a) {
    const int n_a = g.shape[a];
    detail::for_faces(g, a, [&](int i, int j, int k) {
      const int fa = (a == 0 ? i : a == 1 ? j : k);
      if (g.bc == BcMode::Box && (fa == 0 || fa == n_a)) return;  // u = 0
      const double uf = u.face(a, i, j, k);
      int li = i, lj = j, lk = k;
      (a == 0 ? li : a == 1 ? lj : lk) = (fa - 1 + n_a) % n_a;
      int ri = i, rj = j, rk = k;
      (a == 0 ? ri : a == 1 ? rj : rk) = fa % n_a;
      double val;
      if (mode == Advection::Upwind1)
        val = uf >= 0.0 ? f.at(li, lj, lk) : f.at(ri, rj, rk);
      else
        val = 0.5 * (f.at(li, lj, lk) + f.at(ri, rj, rk));
      flux.face(a, i, j, k) = uf * val;
    });
  }
  const ScalarField dv = divergence(flux);
  for (size_t idx = 0; idx < f.v.size(); ++idx) f.v[idx] -= dt * dv.v[idx];
}

inline void require_finite(const ScalarField& f, const char* name, double t) {
  for (double v : f.v)
    if (!std::isfinite(v))
      throw NonFiniteError(std::string("step: non-finite value in field ") +
                           name + " at t = " + std::to_string(t));
}

inline void require_finite(const VectorField& u, const char* name, double t) {
  for (int a = 0; a < u.grid.dim; ++a)
    for (double v : u.comp[a])
      if (!std::isfinite(v))
        throw NonFiniteError(std::string("step: non-finite value in field ") +
                             name + " at t = " + std::to_string(t));
}

inline std::string step_context(long step_index, double t) {
  return "step " + std::to_string(step_index) + " (t = " + std::to_string(t) +
         "): ";
}

}  // namespace detail

/// Advance one operator-split step of size dt. Throws CflError if dt exceeds
/// the stability bound, and NonFiniteError (naming the field) if any result
/// is non-finite.
inline SimState step(const SimState& state, const ModelParams& params,
                     const StepScheme& scheme, double dt,
                     PoissonSolver& solver) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("step: dt must be positive and finite");
  scheme.validate();

  // entry guard: identify which rate the requested dt violates
  {
    const StepScheme unit{scheme.advection, 1.0, scheme.clip_negatives};
    const double bound = stable_dt(state, params, unit);
    if (dt > bound * (1.0 + 1e-9)) {
      const Grid& g = state.grid();
      double adv_rate = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        double mx = 0.0;
        for (double v : state.u.comp[a]) mx = std::max(mx, std::abs(v));
        adv_rate += mx / g.spacing[a];
      }
      const auto chem = chemotactic_speed_max(params, state);
      double chem_rate = 0.0;
      for (int a = 0; a < g.dim; ++a) chem_rate += chem[a] / g.spacing[a];
      double sup_n = 0.0, sup_m = 0.0;
      for (double v : state.n.v) sup_n = std::max(sup_n, std::abs(v));
      for (double v : state.m.v) sup_m = std::max(sup_m, std::abs(v));
      const double react_rate = sup_n + sup_m + 1.0;
      const char* binding = "advection";
      double rate = adv_rate;
      if (chem_rate > rate) {
        rate = chem_rate;
        binding = "chemotaxis";
      }
      if (react_rate > rate) {
        rate = react_rate;
        binding = "reaction";
      }
      throw CflError("step: dt = " + std::to_string(dt) +
                     " exceeds the stability bound " + std::to_string(bound) +
                     " (binding term: " + binding + ")");
    }
  }

  SimState next = state;
  next.t = state.t + dt;

  // 1. advection of the scalars by the current velocity
  detail::advect_scalar(next.n, state.u, dt, scheme.advection);
  detail::advect_scalar(next.c, state.u, dt, scheme.advection);
  detail::advect_scalar(next.m, state.u, dt, scheme.advection);

  // 2. chemotactic transport of n (explicit, centered flux)
  {
    const VectorField flux = regularized_flux(params, next);
    const ScalarField dv = divergence(flux);
    for (size_t idx = 0; idx < next.n.v.size(); ++idx)
      next.n.v[idx] -= dt * dv.v[idx];
  }

  // 3. implicit diffusion (exact mass conservation; see the solver notes)
  next.n = solver.solve_helmholtz_cells(next.n, dt);
  next.c = solver.solve_helmholtz_cells(next.c, dt);
  next.m = solver.solve_helmholtz_cells(next.m, dt);

  // 4. pointwise reactions, unconditionally positivity-preserving
  for (size_t idx = 0; idx < next.n.v.size(); ++idx) {
    const double n_old = next.n.v[idx];
    const double m_old = next.m.v[idx];
    const double n_new = n_old / (1.0 + dt * m_old);
    const double m_new = m_old / (1.0 + dt * n_old);
    next.n.v[idx] = n_new;
    next.m.v[idx] = m_new;
    next.c.v[idx] = (next.c.v[idx] + dt * m_new) / (1.0 + dt);
  }

  if (scheme.clip_negatives) {
    for (double& v : next.n.v) v = std::max(v, 0.0);
    for (double& v : next.c.v) v = std::max(v, 0.0);
    for (double& v : next.m.v) v = std::max(v, 0.0);
  }

  // 5. fluid update with the post-reaction buoyancy sources
  auto [u_new, p_new] = fluid_substep(next, params, dt, solver);
  next.u = std::move(u_new);
  next.p = std::move(p_new);

  detail::require_finite(next.n, "n", next.t);
  detail::require_finite(next.c, "c", next.t);
  detail::require_finite(next.m, "m", next.t);
  detail::require_finite(next.u, "u", next.t);
  detail::require_finite(next.p, "p", next.t);
  return next;
}

// ===========================================================================
// Run loop
// ===========================================================================

/// Observer of a run. on_record fires after every step (and once at t = 0);
/// on_snapshot fires for retained states only.
class RunSink {
 public:
  virtual ~RunSink() = default;
  virtual void on_record(const DiagnosticsRecord& rec,
                         const DissipationLedger& ledger) = 0;
  virtual void on_snapshot(const SimState& state, int index) = 0;
};

struct RunOptions {
  double T = 1.0;           ///< final time
  double dt_fixed = 0.0;    ///< > 0: use exactly this dt (still guarded)
  int snapshot_every = 0;   ///< keep every k-th state; 0 = first and last only
  std::vector<double> capture_times;  ///< extra times to land on and retain
  long max_steps = 2'000'000;

  void validate() const {
    if (!(T >= 0.0) || !std::isfinite(T))
      throw std::invalid_argument("RunOptions: T must be finite and >= 0");
    if (!(dt_fixed >= 0.0) || !std::isfinite(dt_fixed))
      throw std::invalid_argument("RunOptions: dt_fixed must be finite and >= 0");
    if (snapshot_every < 0)
      throw std::invalid_argument("RunOptions: snapshot_every must be >= 0");
    if (max_steps < 1)
      throw std::invalid_argument("RunOptions: max_steps must be >= 1");
    for (double ct : capture_times)
      if (!(ct >= 0.0 && ct <= T) || !std::isfinite(ct))
        throw std::invalid_argument(
            "RunOptions: capture times must lie in [0, T]");
  }
};

/// Retained output of a run: every per-step diagnostics record with its
/// cumulative ledger, plus the retained snapshots.
struct Trajectory {
  std::vector<SimState> snapshots;
  std::vector<DiagnosticsRecord> records;
  std::vector<DissipationLedger> ledgers;  ///< aligned with records
};

/// Integrate from `initial` to time opts.T. The step size is the adaptive
/// bound (or dt_fixed), shortened to land exactly on capture times and on T.
inline Trajectory run(const SimState& initial, const ModelParams& params,
                      const StepScheme& scheme, const RunOptions& opts,
                      PoissonSolver& solver, RunSink* sink = nullptr) {
  params.validate(initial.grid());
  scheme.validate();
  opts.validate();

  const double tiny = 1e-12 * std::max(1.0, opts.T);
  std::vector<double> captures = opts.capture_times;
  std::sort(captures.begin(), captures.end());

  Trajectory traj;
  DissipationLedger ledger;
  SimState state = initial;
  state.t = 0.0;

  int snap_index = 0;
  auto emit_snapshot = [&](const SimState& s) {
    traj.snapshots.push_back(s);
    if (sink) sink->on_snapshot(s, snap_index);
    ++snap_index;
  };
  auto emit_record = [&](const SimState& s, double dt) {
    const DiagnosticsRecord rec = record(s, params, dt);
    traj.records.push_back(rec);
    traj.ledgers.push_back(ledger);
    if (sink) sink->on_record(rec, ledger);
  };

  emit_record(state, 0.0);
  emit_snapshot(state);
  bool last_emitted = true;

  long steps = 0;
  size_t next_capture = 0;
  while (captures.size() > next_capture && captures[next_capture] <= tiny)
    ++next_capture;  // t = 0 is always retained

  while (state.t < opts.T - tiny) {
    if (++steps > opts.max_steps)
      throw std::runtime_error("run: exceeded max_steps before reaching T");

    double dt = opts.dt_fixed > 0.0 ? opts.dt_fixed
                                    : stable_dt(state, params, scheme);
    dt = std::min(dt, opts.T - state.t);
    bool on_capture = false;
    if (next_capture < captures.size()) {
      const double ct = captures[next_capture];
      if (state.t + dt >= ct - tiny) {
        dt = ct - state.t;
        on_capture = true;
      }
    }

    try {
      state = step(state, params, scheme, dt, solver);
    } catch (const CflError& e) {
      throw CflError(detail::step_context(steps, state.t) + e.what());
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(detail::step_context(steps, state.t) + e.what());
    } catch (const SolverFailure& e) {
      throw SolverFailure(SolverFailure::Verbatim{},
                          detail::step_context(steps, state.t) + e.what(),
                          e.residual, e.iterations);
    }
    if (on_capture) {
      state.t = captures[next_capture];  // land bitwise on the requested time
      while (next_capture < captures.size() &&
             captures[next_capture] <= state.t + tiny)
        ++next_capture;
    }
    ledger = update_ledger(ledger, state, state, params, dt);
    emit_record(state, dt);

    const bool periodic_keep =
        opts.snapshot_every > 0 && steps % opts.snapshot_every == 0;
    if (periodic_keep || on_capture) {
      emit_snapshot(state);
      last_emitted = true;
    } else {
      last_emitted = false;
    }
  }

  if (!last_emitted) emit_snapshot(state);
  return traj;
}

}  // namespace coralsim
