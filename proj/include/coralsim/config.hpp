/// @file config.hpp
/// @brief Flat key=value run configuration: parser (with line-numbered
///        errors), canonical serializer (round-trip exact), and builders that
///        materialize the grid, parameters, scheme, preset, run options, and
///        solver a run needs.
///
/// Format: one `key = value` per line; '#' starts a comment (full-line or
/// trailing); blank lines ignored. Every key is optional and has a default.
/// Unknown and duplicate keys are errors. Lists (shape, extent, diag_scale)
/// are comma-separated with exactly `dim` entries. `alpha` additionally
/// accepts an exact fraction "a/b".

#pragma once

#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"
#include "coralsim/presets.hpp"
#include "coralsim/stepper.hpp"

namespace coralsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ===========================================================================
// The configuration record
// ===========================================================================

struct RunConfig {
  // grid
  int dim = 2;
  std::array<int, 3> shape{32, 32, 1};
  std::array<double, 3> extent{1.0, 1.0, 1.0};
  std::string bc = "box";  ///< "box" | "periodic"
  // model
  double alpha = 0.5;
  double c_s = 1.0;
  double kappa = 1.0;
  double epsilon = 0.1;
  std::string sensitivity = "scalar";  ///< "scalar" | "diagonal" | "rotational"
  std::string phi = "zero";            ///< potential profile name
  double cutoff_margin = 0.0;
  std::array<double, 3> diag_scale{1.0, 1.0, 1.0};
  double rot_angle = 0.5;
  // initial state
  std::string preset = "gaussian_blobs";  ///< "homogeneous" | "gaussian_blobs" | "random_smooth"
  double n0 = 1.0, m0 = 1.0, c0 = 0.0;
  double floor = 0.05;
  double amplitude = 2.0;
  double swirl = 0.2;
  std::uint64_t seed = 12345;
  // stepping
  std::string advection = "upwind1";  ///< "upwind1" | "central2"
  double dt_safety = 0.4;
  bool clip_negatives = false;
  double dt_fixed = 0.0;
  double T = 1.0;
  int snapshot_every = 0;
  std::string output_dir = "out";
  // solver
  std::string method = "auto";  ///< "auto" | "spectral" | "cg"
  double tol = 1e-10;
  int max_iter = 20000;

  bool operator==(const RunConfig&) const = default;
};

// ===========================================================================
// Parsing
// ===========================================================================

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] inline void config_fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& v, int line, const char* key) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    config_fail(line, std::string(key) + ": expected a number, got '" + t + "'");
  return x;
}

/// alpha additionally accepts the exact fraction form "a/b".
inline double parse_double_or_fraction(const std::string& v, int line,
                                       const char* key) {
  const std::string t = trim(v);
  const size_t slash = t.find('/');
  if (slash == std::string::npos) return parse_double(t, line, key);
  const double num = parse_double(t.substr(0, slash), line, key);
  const double den = parse_double(t.substr(slash + 1), line, key);
  if (den == 0.0) config_fail(line, std::string(key) + ": zero denominator");
  return num / den;
}

inline long parse_long(const std::string& v, int line, const char* key) {
  const std::string t = trim(v);
  char* end = nullptr;
  const long x = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size())
    config_fail(line, std::string(key) + ": expected an integer, got '" + t + "'");
  return x;
}

inline std::uint64_t parse_u64(const std::string& v, int line, const char* key) {
  const std::string t = trim(v);
  char* end = nullptr;
  const unsigned long long x = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || t[0] == '-')
    config_fail(line, std::string(key) +
                          ": expected a nonnegative integer, got '" + t + "'");
  return static_cast<std::uint64_t>(x);
}

inline bool parse_bool(const std::string& v, int line, const char* key) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  config_fail(line, std::string(key) + ": expected true/false, got '" + t + "'");
}

inline std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : v) {
    if (ch == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

}  // namespace detail

/// Parse a configuration from text. Throws ConfigError (with the offending
/// line number) on unknown keys, duplicate keys, or malformed values.
inline RunConfig parse_config(std::istream& in) {
  using detail::config_fail;

  // collect key -> (line, value), rejecting duplicates as we go
  std::map<std::string, std::pair<int, std::string>> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const size_t eq = body.find('=');
    if (eq == std::string::npos)
      config_fail(line_no, "expected 'key = value', got '" + body + "'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string val = detail::trim(body.substr(eq + 1));
    if (key.empty()) config_fail(line_no, "empty key");
    const auto [it, inserted] = kv.emplace(key, std::make_pair(line_no, val));
    if (!inserted)
      config_fail(line_no, "duplicate key '" + key + "' (first set on line " +
                               std::to_string(it->second.first) + ")");
  }

  static const char* known[] = {
      "dim",        "shape",         "extent",        "bc",
      "alpha",      "c_s",           "kappa",         "epsilon",
      "sensitivity", "phi",          "cutoff_margin", "diag_scale",
      "rot_angle",  "preset",        "n0",            "m0",
      "c0",         "floor",         "amplitude",     "swirl",
      "seed",       "advection",     "dt_safety",     "clip_negatives",
      "dt_fixed",   "T",             "snapshot_every", "output_dir",
      "method",     "tol",           "max_iter"};
  for (const auto& [key, lv] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) config_fail(lv.first, "unknown key '" + key + "'");
  }

  RunConfig cfg;
  auto has = [&](const char* k) { return kv.count(k) != 0; };
  auto raw = [&](const char* k) -> const std::string& { return kv.at(k).second; };
  auto at = [&](const char* k) -> int { return kv.at(k).first; };

  if (has("dim")) {
    const long d = detail::parse_long(raw("dim"), at("dim"), "dim");
    if (d != 2 && d != 3) config_fail(at("dim"), "dim must be 2 or 3");
    cfg.dim = static_cast<int>(d);
    if (cfg.dim == 3) {  // adjust defaults before any explicit lists apply
      cfg.shape = {16, 16, 16};
      cfg.extent = {1.0, 1.0, 1.0};
    }
  }
  if (has("shape")) {
    const auto parts = detail::split_commas(raw("shape"));
    if (static_cast<int>(parts.size()) != cfg.dim)
      config_fail(at("shape"), "shape needs exactly " + std::to_string(cfg.dim) +
                                   " comma-separated entries");
    cfg.shape = {1, 1, 1};
    for (int a = 0; a < cfg.dim; ++a)
      cfg.shape[a] = static_cast<int>(
          detail::parse_long(parts[static_cast<size_t>(a)], at("shape"), "shape"));
  }
  if (has("extent")) {
    const auto parts = detail::split_commas(raw("extent"));
    if (static_cast<int>(parts.size()) != cfg.dim)
      config_fail(at("extent"), "extent needs exactly " +
                                    std::to_string(cfg.dim) +
                                    " comma-separated entries");
    cfg.extent = {1.0, 1.0, 1.0};
    for (int a = 0; a < cfg.dim; ++a)
      cfg.extent[a] =
          detail::parse_double(parts[static_cast<size_t>(a)], at("extent"), "extent");
  }
  if (has("diag_scale")) {
    const auto parts = detail::split_commas(raw("diag_scale"));
    if (static_cast<int>(parts.size()) != cfg.dim)
      config_fail(at("diag_scale"), "diag_scale needs exactly " +
                                        std::to_string(cfg.dim) +
                                        " comma-separated entries");
    cfg.diag_scale = {1.0, 1.0, 1.0};
    for (int a = 0; a < cfg.dim; ++a)
      cfg.diag_scale[a] = detail::parse_double(parts[static_cast<size_t>(a)],
                                               at("diag_scale"), "diag_scale");
  }

  auto str_choice = [&](const char* k, std::initializer_list<const char*> opts,
                        std::string& out) {
    if (!has(k)) return;
    const std::string v = detail::trim(raw(k));
    for (const char* o : opts)
      if (v == o) {
        out = v;
        return;
      }
    std::string msg = std::string(k) + " must be one of {";
    bool first = true;
    for (const char* o : opts) {
      if (!first) msg += ", ";
      msg += o;
      first = false;
    }
    config_fail(at(k), msg + "}, got '" + v + "'");
  };

  str_choice("bc", {"box", "periodic"}, cfg.bc);
  str_choice("sensitivity", {"scalar", "diagonal", "rotational"}, cfg.sensitivity);
  str_choice("preset", {"homogeneous", "gaussian_blobs", "random_smooth"},
             cfg.preset);
  str_choice("advection", {"upwind1", "central2"}, cfg.advection);
  str_choice("method", {"auto", "spectral", "cg"}, cfg.method);
  if (has("phi")) cfg.phi = detail::trim(raw("phi"));
  if (has("output_dir")) cfg.output_dir = detail::trim(raw("output_dir"));

  if (has("alpha"))
    cfg.alpha = detail::parse_double_or_fraction(raw("alpha"), at("alpha"), "alpha");
  if (has("c_s")) cfg.c_s = detail::parse_double(raw("c_s"), at("c_s"), "c_s");
  if (has("kappa")) cfg.kappa = detail::parse_double(raw("kappa"), at("kappa"), "kappa");
  if (has("epsilon"))
    cfg.epsilon = detail::parse_double(raw("epsilon"), at("epsilon"), "epsilon");
  if (has("cutoff_margin"))
    cfg.cutoff_margin = detail::parse_double(raw("cutoff_margin"),
                                             at("cutoff_margin"), "cutoff_margin");
  if (has("rot_angle"))
    cfg.rot_angle = detail::parse_double(raw("rot_angle"), at("rot_angle"), "rot_angle");
  if (has("n0")) cfg.n0 = detail::parse_double(raw("n0"), at("n0"), "n0");
  if (has("m0")) cfg.m0 = detail::parse_double(raw("m0"), at("m0"), "m0");
  if (has("c0")) cfg.c0 = detail::parse_double(raw("c0"), at("c0"), "c0");
  if (has("floor")) cfg.floor = detail::parse_double(raw("floor"), at("floor"), "floor");
  if (has("amplitude"))
    cfg.amplitude = detail::parse_double(raw("amplitude"), at("amplitude"), "amplitude");
  if (has("swirl")) cfg.swirl = detail::parse_double(raw("swirl"), at("swirl"), "swirl");
  if (has("seed")) cfg.seed = detail::parse_u64(raw("seed"), at("seed"), "seed");
  if (has("dt_safety"))
    cfg.dt_safety = detail::parse_double(raw("dt_safety"), at("dt_safety"), "dt_safety");
  if (has("clip_negatives"))
    cfg.clip_negatives = detail::parse_bool(raw("clip_negatives"),
                                            at("clip_negatives"), "clip_negatives");
  if (has("dt_fixed"))
    cfg.dt_fixed = detail::parse_double(raw("dt_fixed"), at("dt_fixed"), "dt_fixed");
  if (has("T")) cfg.T = detail::parse_double(raw("T"), at("T"), "T");
  if (has("snapshot_every")) {
    const long v = detail::parse_long(raw("snapshot_every"), at("snapshot_every"),
                                      "snapshot_every");
    if (v < 0) config_fail(at("snapshot_every"), "snapshot_every must be >= 0");
    cfg.snapshot_every = static_cast<int>(v);
  }
  if (has("tol")) cfg.tol = detail::parse_double(raw("tol"), at("tol"), "tol");
  if (has("max_iter")) {
    const long v = detail::parse_long(raw("max_iter"), at("max_iter"), "max_iter");
    if (v < 1) config_fail(at("max_iter"), "max_iter must be >= 1");
    cfg.max_iter = static_cast<int>(v);
  }
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

// ===========================================================================
// Serialization
// ===========================================================================

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T, class F>
inline std::string join_dim(const std::array<T, 3>& a, int dim, F&& fmt) {
  std::string out;
  for (int i = 0; i < dim; ++i) {
    if (i) out += ",";
    out += fmt(a[i]);
  }
  return out;
}

}  // namespace detail

/// Canonical text form: every simulation key, fixed order, full double
/// precision.  parse_config(serialize_config(c)) reproduces c exactly.
/// output_dir is deliberately omitted: it places a run on disk but is not
/// part of the simulation's identity, so the echo stored inside a run
/// directory stays byte-identical across reruns into different locations.
inline std::string serialize_config(const RunConfig& c) {
  using detail::fmt_g17;
  std::string s;
  auto kv = [&](const char* k, const std::string& v) {
    s += k;
    s += " = ";
    s += v;
    s += "\n";
  };
  kv("dim", std::to_string(c.dim));
  kv("shape", detail::join_dim(c.shape, c.dim,
                               [](int v) { return std::to_string(v); }));
  kv("extent", detail::join_dim(c.extent, c.dim, fmt_g17));
  kv("bc", c.bc);
  kv("alpha", fmt_g17(c.alpha));
  kv("c_s", fmt_g17(c.c_s));
  kv("kappa", fmt_g17(c.kappa));
  kv("epsilon", fmt_g17(c.epsilon));
  kv("sensitivity", c.sensitivity);
  kv("phi", c.phi);
  kv("cutoff_margin", fmt_g17(c.cutoff_margin));
  kv("diag_scale", detail::join_dim(c.diag_scale, c.dim, fmt_g17));
  kv("rot_angle", fmt_g17(c.rot_angle));
  kv("preset", c.preset);
  kv("n0", fmt_g17(c.n0));
  kv("m0", fmt_g17(c.m0));
  kv("c0", fmt_g17(c.c0));
  kv("floor", fmt_g17(c.floor));
  kv("amplitude", fmt_g17(c.amplitude));
  kv("swirl", fmt_g17(c.swirl));
  kv("seed", std::to_string(c.seed));
  kv("advection", c.advection);
  kv("dt_safety", fmt_g17(c.dt_safety));
  kv("clip_negatives", c.clip_negatives ? "true" : "false");
  kv("dt_fixed", fmt_g17(c.dt_fixed));
  kv("T", fmt_g17(c.T));
  kv("snapshot_every", std::to_string(c.snapshot_every));
  kv("method", c.method);
  kv("tol", fmt_g17(c.tol));
  kv("max_iter", std::to_string(c.max_iter));
  return s;
}

// ===========================================================================
// Builders
// ===========================================================================

inline Grid make_grid_from(const RunConfig& c) {
  const BcMode bc = c.bc == "periodic" ? BcMode::Periodic : BcMode::Box;
  return make_grid(c.dim, c.shape, c.extent, bc);
}

inline ModelParams make_params_from(const RunConfig& c, const Grid& g) {
  ModelParams p;
  p.alpha = c.alpha;
  p.c_s = c.c_s;
  p.kappa = c.kappa;
  p.epsilon = c.epsilon;
  p.sensitivity = c.sensitivity == "diagonal"   ? SensitivityKind::DiagonalDecay
                  : c.sensitivity == "rotational" ? SensitivityKind::RotationalDecay
                                                  : SensitivityKind::ScalarDecay;
  p.diag_scale = c.diag_scale;
  p.rot_angle = c.rot_angle;
  p.phi = make_potential(g, c.phi);
  p.run_T = c.T;
  p.cutoff_margin = c.cutoff_margin;
  p.validate(g);
  return p;
}

inline StepScheme make_scheme_from(const RunConfig& c) {
  StepScheme s;
  s.advection = c.advection == "central2" ? Advection::Central2 : Advection::Upwind1;
  s.dt_safety = c.dt_safety;
  s.clip_negatives = c.clip_negatives;
  s.validate();
  return s;
}

inline Preset make_preset_from(const RunConfig& c) {
  Preset p;
  p.kind = c.preset == "homogeneous"     ? Preset::Kind::HomogeneousPair
           : c.preset == "random_smooth" ? Preset::Kind::RandomSmooth
                                         : Preset::Kind::GaussianBlobs;
  p.n0 = c.n0;
  p.m0 = c.m0;
  p.c0 = c.c0;
  p.floor = c.floor;
  p.amplitude = c.amplitude;
  p.swirl = c.swirl;
  p.seed = c.seed;
  p.validate();
  return p;
}

inline RunOptions make_run_options_from(const RunConfig& c) {
  RunOptions o;
  o.T = c.T;
  o.dt_fixed = c.dt_fixed;
  o.snapshot_every = c.snapshot_every;
  o.validate();
  return o;
}

inline PoissonSolver make_solver_from(const RunConfig& c, const Grid& g) {
  PoissonMethod m;
  if (c.method == "spectral") {
    m = PoissonMethod::SpectralPeriodic;
  } else if (c.method == "cg") {
    m = PoissonMethod::ConjugateGradientNeumann;
  } else {
    m = g.bc == BcMode::Periodic ? PoissonMethod::SpectralPeriodic
                                 : PoissonMethod::ConjugateGradientNeumann;
  }
  return PoissonSolver(g, m, c.tol, c.max_iter);
}

}  // namespace coralsim
