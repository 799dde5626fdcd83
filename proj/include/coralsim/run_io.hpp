/// @file run_io.hpp
/// @brief Run directory I/O: a sink that streams diagnostics to CSV and
///        states to numbered snapshot files (plus a config echo), an
///        in-memory sink for tests, and loaders for stored runs.
///
/// A run directory holds:
///   config.txt        canonical echo of the configuration that produced it
///   diagnostics.csv   one row per step (header below), full double precision
///   snap_000000.ksns  retained snapshots, numbered in emission order

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coralsim/diagnostics.hpp"
#include "coralsim/model.hpp"
#include "coralsim/snapshot.hpp"
#include "coralsim/stepper.hpp"

namespace coralsim {

/// Exact diagnostics.csv header (column order is part of the format).
inline constexpr const char* diagnostics_csv_header =
    "t,dt,mass_n,mass_m,mass_c,sup_m,sup_c,grad_c_l2sq,u_l2sq,n_lp,entropy_n,"
    "energy,div_u_max,D1,D2,D3,D4,D5,B1,B2,B3";

namespace detail {

inline void csv_field(std::string& row, double v, bool first = false) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (!first) row += ',';
  row += buf;
}

}  // namespace detail

inline std::string diagnostics_csv_row(const DiagnosticsRecord& r,
                                       const DissipationLedger& l) {
  std::string row;
  detail::csv_field(row, r.t, true);
  detail::csv_field(row, r.dt);
  detail::csv_field(row, r.mass_n);
  detail::csv_field(row, r.mass_m);
  detail::csv_field(row, r.mass_c);
  detail::csv_field(row, r.sup_m);
  detail::csv_field(row, r.sup_c);
  detail::csv_field(row, r.grad_c_l2sq);
  detail::csv_field(row, r.u_l2sq);
  detail::csv_field(row, r.n_lp);
  detail::csv_field(row, r.entropy_n);
  detail::csv_field(row, r.energy);
  detail::csv_field(row, r.div_u_max);
  detail::csv_field(row, l.D1);
  detail::csv_field(row, l.D2);
  detail::csv_field(row, l.D3);
  detail::csv_field(row, l.D4);
  detail::csv_field(row, l.D5);
  detail::csv_field(row, l.B1);
  detail::csv_field(row, l.B2);
  detail::csv_field(row, l.B3);
  return row;
}

/// Streams a run into a directory (created if absent).
class RunDirSink : public RunSink {
 public:
  RunDirSink(const std::string& dir, const std::string& config_echo)
      : dir_(dir) {
    std::filesystem::create_directories(dir_);
    {
      std::ofstream cfg(dir_ / "config.txt", std::ios::binary);
      if (!cfg)
        throw std::runtime_error("RunDirSink: cannot write config.txt in '" +
                                 dir + "'");
      cfg << config_echo;
    }
    csv_.open(dir_ / "diagnostics.csv", std::ios::binary);
    if (!csv_)
      throw std::runtime_error("RunDirSink: cannot write diagnostics.csv in '" +
                               dir + "'");
    csv_ << diagnostics_csv_header << "\n";
  }

  void on_record(const DiagnosticsRecord& rec,
                 const DissipationLedger& ledger) override {
    csv_ << diagnostics_csv_row(rec, ledger) << "\n";
  }

  void on_snapshot(const SimState& state, int index) override {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%06d.ksns", index);
    write_snapshot((dir_ / name).string(), state);
  }

  void flush() { csv_.flush(); }

 private:
  std::filesystem::path dir_;
  std::ofstream csv_;
};

/// Accumulates everything in memory (tests, sweeps).
class MemorySink : public RunSink {
 public:
  std::vector<DiagnosticsRecord> records;
  std::vector<DissipationLedger> ledgers;
  std::vector<SimState> snapshots;

  void on_record(const DiagnosticsRecord& rec,
                 const DissipationLedger& ledger) override {
    records.push_back(rec);
    ledgers.push_back(ledger);
  }
  void on_snapshot(const SimState& state, int /*index*/) override {
    snapshots.push_back(state);
  }
};

/// Load every snap_*.ksns in a run directory, ordered by index.
inline std::vector<SimState> load_snapshots(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (!fs::is_directory(dir))
    throw std::runtime_error("load_snapshots: '" + dir + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() == 16 && name.rfind("snap_", 0) == 0 &&
        name.find(".ksns") == 11)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SimState> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_snapshot(f.string()));
  return out;
}

}  // namespace coralsim
