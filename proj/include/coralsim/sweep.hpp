/// @file sweep.hpp
/// @brief Parameter sweeps: the regularization-refinement study (distances
///        between runs at successive epsilon values, checked for a Cauchy
///        trend) and the sensitivity-exponent scan (per-alpha stability
///        summary with ledger growth slopes). Both run serially or with one
///        thread per value, with bitwise identical results.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "coralsim/config.hpp"
#include "coralsim/diagnostics.hpp"
#include "coralsim/fluid.hpp"
#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"
#include "coralsim/presets.hpp"
#include "coralsim/stepper.hpp"

namespace coralsim {

// ===========================================================================
// Plans
// ===========================================================================

enum class SweepVariable { Epsilon, Alpha };

struct SweepPlan {
  RunConfig base;
  SweepVariable variable = SweepVariable::Epsilon;
  std::vector<double> values;
  double compare_time = -1.0;  ///< epsilon sweep comparison time; < 0 means T/2
  bool parallel = false;

  void validate() const {
    if (values.size() < 2)
      throw std::invalid_argument("SweepPlan: need at least 2 values");
    for (double v : values)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("SweepPlan: values must be finite and >= 0");
    if (variable == SweepVariable::Epsilon) {
      // Non-increasing: ties are legal (degenerate pairs compare identical
      // runs and report zero distance), increases are not.
      for (size_t i = 1; i < values.size(); ++i)
        if (!(values[i] <= values[i - 1]))
          throw std::invalid_argument(
              "SweepPlan: epsilon values must be non-increasing");
      const double tc = compare_time < 0.0 ? 0.5 * base.T : compare_time;
      if (!(tc > 0.0 && tc <= base.T))
        throw std::invalid_argument(
            "SweepPlan: compare_time must lie in (0, T]");
    }
  }
};

namespace detail {

template <class F>
auto map_values(const std::vector<double>& vals, bool parallel, F&& f)
    -> std::vector<decltype(f(0.0))> {
  using R = decltype(f(0.0));
  std::vector<R> out;
  out.reserve(vals.size());
  if (!parallel) {
    for (double v : vals) out.push_back(f(v));
    return out;
  }
  std::vector<std::future<R>> futs;
  futs.reserve(vals.size());
  for (double v : vals) futs.push_back(std::async(std::launch::async, f, v));
  for (auto& fu : futs) out.push_back(fu.get());
  return out;
}

}  // namespace detail

// ===========================================================================
// Epsilon refinement
// ===========================================================================

struct EpsilonPair {
  double eps_hi = 0.0, eps_lo = 0.0;
  double d_n = 0.0, d_c = 0.0, d_m = 0.0, d_u = 0.0;
};

struct EpsilonSweepResult {
  std::vector<double> values;
  double compare_time = 0.0;
  double r_norm = 2.0;  ///< Lr exponent used for the n distance
  std::vector<EpsilonPair> pairs;
  bool cauchy_n = true, cauchy_c = true, cauchy_m = true, cauchy_u = true;
};

/// Lr exponent for comparing n across regularizations: 3 alpha + 1 below
/// alpha = 1/3, saturating at 2 above.
inline double refinement_norm_exponent(double alpha) {
  return alpha < 1.0 / 3.0 ? 3.0 * alpha + 1.0 : 2.0;
}

namespace detail {

/// At most one increase along the sequence counts as a Cauchy-like trend.
inline bool cauchy_trend(const std::vector<double>& d) {
  int inversions = 0;
  for (size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[i - 1] * (1.0 + 1e-9)) ++inversions;
  return inversions <= 1;
}

}  // namespace detail

/// Run the base configuration once per epsilon value and measure distances
/// between consecutive runs at the comparison time: n in Lr, c and m in L2,
/// u in the face L2 norm.
inline EpsilonSweepResult epsilon_sweep(const SweepPlan& plan) {
  if (plan.variable != SweepVariable::Epsilon)
    throw std::invalid_argument("epsilon_sweep: plan targets another variable");
  plan.validate();
  const double tstar =
      plan.compare_time < 0.0 ? 0.5 * plan.base.T : plan.compare_time;

  auto run_one = [&](double eps) -> SimState {
    RunConfig cfg = plan.base;
    cfg.epsilon = eps;
    const Grid g = make_grid_from(cfg);
    const ModelParams params = make_params_from(cfg, g);
    const StepScheme scheme = make_scheme_from(cfg);
    const Preset preset = make_preset_from(cfg);
    PoissonSolver solver = make_solver_from(cfg, g);
    const SimState init = make_initial_state(g, preset, solver);
    RunOptions opts = make_run_options_from(cfg);
    opts.snapshot_every = 0;
    opts.capture_times = {tstar};
    const Trajectory traj = run(init, params, scheme, opts, solver);
    for (const SimState& s : traj.snapshots)
      if (s.t == tstar) return s;
    throw std::logic_error("epsilon_sweep: comparison time not captured");
  };

  const std::vector<SimState> states =
      detail::map_values(plan.values, plan.parallel, run_one);

  EpsilonSweepResult res;
  res.values = plan.values;
  res.compare_time = tstar;
  res.r_norm = refinement_norm_exponent(plan.base.alpha);

  std::vector<double> dn, dc, dm, du;
  for (size_t i = 0; i + 1 < states.size(); ++i) {
    const SimState& a = states[i];
    const SimState& b = states[i + 1];
    ScalarField df(a.grid());
    EpsilonPair pr;
    pr.eps_hi = plan.values[i];
    pr.eps_lo = plan.values[i + 1];
    for (size_t idx = 0; idx < df.v.size(); ++idx)
      df.v[idx] = a.n.v[idx] - b.n.v[idx];
    pr.d_n = lp_norm(df, res.r_norm);
    for (size_t idx = 0; idx < df.v.size(); ++idx)
      df.v[idx] = a.c.v[idx] - b.c.v[idx];
    pr.d_c = lp_norm(df, 2.0);
    for (size_t idx = 0; idx < df.v.size(); ++idx)
      df.v[idx] = a.m.v[idx] - b.m.v[idx];
    pr.d_m = lp_norm(df, 2.0);
    VectorField dv = a.u;
    for (int ax = 0; ax < a.grid().dim; ++ax)
      for (size_t idx = 0; idx < dv.comp[ax].size(); ++idx)
        dv.comp[ax][idx] = a.u.comp[ax][idx] - b.u.comp[ax][idx];
    pr.d_u = std::sqrt(l2sq_faces(dv));
    res.pairs.push_back(pr);
    dn.push_back(pr.d_n);
    dc.push_back(pr.d_c);
    dm.push_back(pr.d_m);
    du.push_back(pr.d_u);
  }
  res.cauchy_n = detail::cauchy_trend(dn);
  res.cauchy_c = detail::cauchy_trend(dc);
  res.cauchy_m = detail::cauchy_trend(dm);
  res.cauchy_u = detail::cauchy_trend(du);
  return res;
}

// ===========================================================================
// Alpha scan
// ===========================================================================

struct AlphaRow {
  double alpha = 0.0;
  std::string outcome;  ///< "ok" | "outside-theorem" | "blow-up(NaN)"
  double reached_T = 0.0;
  double max_sup_n = 0.0;
  double final_energy = 0.0;
  /// Envelope-fit slopes of the cumulative ledgers D1..D5, B1, B2, B3.
  std::array<double, 8> ledger_slopes{};
};

struct AlphaSweepResult {
  std::vector<AlphaRow> rows;
};

/// Run the base configuration once per alpha value, tracking the peak sup of
/// n, the final energy, and the growth rate of each cumulative ledger. A run
/// that produces non-finite values is reported as "blow-up(NaN)" with the
/// data gathered up to the failure; it does not abort the scan.
inline AlphaSweepResult alpha_sweep(const SweepPlan& plan) {
  if (plan.variable != SweepVariable::Alpha)
    throw std::invalid_argument("alpha_sweep: plan targets another variable");
  plan.validate();

  auto run_one = [&](double alpha) -> AlphaRow {
    RunConfig cfg = plan.base;
    cfg.alpha = alpha;
    const Grid g = make_grid_from(cfg);
    const ModelParams params = make_params_from(cfg, g);
    const StepScheme scheme = make_scheme_from(cfg);
    const Preset preset = make_preset_from(cfg);
    PoissonSolver solver = make_solver_from(cfg, g);
    SimState state = make_initial_state(g, preset, solver);

    AlphaRow row;
    row.alpha = alpha;
    row.max_sup_n = lp_norm(state.n, std::numeric_limits<double>::infinity());
    row.final_energy = energy_functional(state, params);

    DissipationLedger ledger;
    std::vector<std::pair<double, DissipationLedger>> series;
    const double T = cfg.T;
    const double tiny = 1e-12 * std::max(1.0, T);
    bool blew_up = false;
    long steps = 0;
    const long max_steps = 2'000'000;
    try {
      while (state.t < T - tiny && steps < max_steps) {
        ++steps;
        double dt = cfg.dt_fixed > 0.0 ? cfg.dt_fixed
                                       : stable_dt(state, params, scheme);
        dt = std::min(dt, T - state.t);
        state = step(state, params, scheme, dt, solver);
        ledger = update_ledger(ledger, state, state, params, dt);
        series.emplace_back(state.t, ledger);
        row.max_sup_n = std::max(
            row.max_sup_n,
            lp_norm(state.n, std::numeric_limits<double>::infinity()));
        row.final_energy = energy_functional(state, params);
      }
    } catch (const NonFiniteError&) {
      blew_up = true;
    }
    row.reached_T = state.t;
    row.outcome = blew_up          ? "blow-up(NaN)"
                  : alpha == 0.0   ? "outside-theorem"
                                   : "ok";
    if (series.size() >= 3) {
      auto fit_component = [&](auto pick) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(series.size());
        for (const auto& [t, led] : series) pts.emplace_back(t, pick(led));
        return envelope_fit(pts).slope;
      };
      row.ledger_slopes[0] = fit_component([](const DissipationLedger& l) { return l.D1; });
      row.ledger_slopes[1] = fit_component([](const DissipationLedger& l) { return l.D2; });
      row.ledger_slopes[2] = fit_component([](const DissipationLedger& l) { return l.D3; });
      row.ledger_slopes[3] = fit_component([](const DissipationLedger& l) { return l.D4; });
      row.ledger_slopes[4] = fit_component([](const DissipationLedger& l) { return l.D5; });
      row.ledger_slopes[5] = fit_component([](const DissipationLedger& l) { return l.B1; });
      row.ledger_slopes[6] = fit_component([](const DissipationLedger& l) { return l.B2; });
      row.ledger_slopes[7] = fit_component([](const DissipationLedger& l) { return l.B3; });
    }
    return row;
  };

  AlphaSweepResult res;
  res.rows = detail::map_values(plan.values, plan.parallel, run_one);
  return res;
}

// ===========================================================================
// Table formatting (deterministic; used to compare serial vs parallel runs)
// ===========================================================================

inline std::string format_epsilon_table(const EpsilonSweepResult& r) {
  using detail::fmt_g17;
  std::string s = "eps_hi,eps_lo,d_n,d_c,d_m,d_u\n";
  for (const auto& p : r.pairs) {
    s += fmt_g17(p.eps_hi) + "," + fmt_g17(p.eps_lo) + "," + fmt_g17(p.d_n) +
         "," + fmt_g17(p.d_c) + "," + fmt_g17(p.d_m) + "," + fmt_g17(p.d_u) +
         "\n";
  }
  s += "# compare_time = " + fmt_g17(r.compare_time) +
       ", r_norm = " + fmt_g17(r.r_norm) + "\n";
  s += std::string("# cauchy: n=") + (r.cauchy_n ? "yes" : "no") +
       " c=" + (r.cauchy_c ? "yes" : "no") + " m=" + (r.cauchy_m ? "yes" : "no") +
       " u=" + (r.cauchy_u ? "yes" : "no") + "\n";
  return s;
}

inline std::string format_alpha_table(const AlphaSweepResult& r) {
  using detail::fmt_g17;
  std::string s =
      "alpha,outcome,reached_T,max_sup_n,final_energy,slope_D1,slope_D2,"
      "slope_D3,slope_D4,slope_D5,slope_B1,slope_B2,slope_B3\n";
  for (const auto& row : r.rows) {
    s += fmt_g17(row.alpha) + "," + row.outcome + "," + fmt_g17(row.reached_T) +
         "," + fmt_g17(row.max_sup_n) + "," + fmt_g17(row.final_energy);
    for (double v : row.ledger_slopes) s += "," + fmt_g17(v);
    s += "\n";
  }
  return s;
}

}  // namespace coralsim
