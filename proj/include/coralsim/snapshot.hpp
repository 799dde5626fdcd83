/// @file snapshot.hpp
/// @brief Binary state snapshots: a self-describing little-endian container
///        holding the grid header and the five fields of one SimState.
///        Round-trips are bit-exact.
///
/// Layout (all integers little-endian):
///   bytes 0..3   magic "KSNS"
///   u32          version (currently 1)
///   u32          dim (2 or 3)
///   u32          boundary mode (0 box, 1 periodic)
///   u32 x 3      cells per axis
///   f64 x 3      box extent per axis
///   f64          time t
///   u32          field count
///   per field:   u32 name length, name bytes, u64 value count,
///                f64 x count payload (row-major, i fastest)
/// Fields appear in the fixed order n, c, m, p, u0, u1[, u2].

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"

namespace coralsim {

struct SnapshotError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline void snapshot_read(std::istream& in, char* dst, std::streamsize count) {
  in.read(dst, count);
  if (in.gcount() != count)
    throw SnapshotError("snapshot: unexpected end of file");
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  snapshot_read(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  snapshot_read(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void put_field(std::ostream& out, const std::string& name,
                      const std::vector<double>& data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, data.size());
  for (double v : data) put_f64(out, v);
}

inline void get_field(std::istream& in, const std::string& expect_name,
                      std::vector<double>& data, std::uint64_t expect_count) {
  const std::uint32_t len = get_u32(in);
  if (len > 64) throw SnapshotError("snapshot: implausible field name length");
  std::string name(len, '\0');
  snapshot_read(in, name.data(), len);
  if (name != expect_name)
    throw SnapshotError("snapshot: expected field '" + expect_name +
                        "', found '" + name + "'");
  const std::uint64_t count = get_u64(in);
  if (count != expect_count)
    throw SnapshotError("snapshot: field '" + name + "' has " +
                        std::to_string(count) + " values, expected " +
                        std::to_string(expect_count));
  data.resize(count);
  for (auto& v : data) v = get_f64(in);
}

}  // namespace detail

inline constexpr std::uint32_t snapshot_version = 1;

inline void write_snapshot(std::ostream& out, const SimState& st) {
  const Grid& g = st.grid();
  out.write("KSNS", 4);
  detail::put_u32(out, snapshot_version);
  detail::put_u32(out, static_cast<std::uint32_t>(g.dim));
  detail::put_u32(out, g.bc == BcMode::Periodic ? 1u : 0u);
  for (int a = 0; a < 3; ++a)
    detail::put_u32(out, static_cast<std::uint32_t>(g.shape[a]));
  for (int a = 0; a < 3; ++a) detail::put_f64(out, g.extent[a]);
  detail::put_f64(out, st.t);
  detail::put_u32(out, static_cast<std::uint32_t>(4 + g.dim));
  detail::put_field(out, "n", st.n.v);
  detail::put_field(out, "c", st.c.v);
  detail::put_field(out, "m", st.m.v);
  detail::put_field(out, "p", st.p.v);
  for (int a = 0; a < g.dim; ++a)
    detail::put_field(out, "u" + std::to_string(a), st.u.comp[a]);
  if (!out) throw SnapshotError("snapshot: write failed");
}

inline SimState read_snapshot(std::istream& in) {
  char magic[4];
  detail::snapshot_read(in, magic, 4);
  if (std::memcmp(magic, "KSNS", 4) != 0)
    throw SnapshotError("snapshot: bad magic (not a snapshot file)");
  const std::uint32_t version = detail::get_u32(in);
  if (version != snapshot_version)
    throw SnapshotError("snapshot: unsupported version " +
                        std::to_string(version));
  const std::uint32_t dim = detail::get_u32(in);
  if (dim != 2 && dim != 3)
    throw SnapshotError("snapshot: dim must be 2 or 3");
  const std::uint32_t bc_raw = detail::get_u32(in);
  if (bc_raw > 1) throw SnapshotError("snapshot: bad boundary mode");
  std::array<int, 3> shape;
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t s = detail::get_u32(in);
    if (s == 0 || s > (1u << 24)) throw SnapshotError("snapshot: bad shape");
    shape[a] = static_cast<int>(s);
  }
  std::array<double, 3> extent;
  for (int a = 0; a < 3; ++a) extent[a] = detail::get_f64(in);
  const double t = detail::get_f64(in);

  const Grid g = make_grid(static_cast<int>(dim), shape, extent,
                           bc_raw == 1 ? BcMode::Periodic : BcMode::Box);
  const std::uint32_t nfields = detail::get_u32(in);
  if (nfields != static_cast<std::uint32_t>(4 + g.dim))
    throw SnapshotError("snapshot: expected " + std::to_string(4 + g.dim) +
                        " fields, file has " + std::to_string(nfields));

  SimState st(g);
  st.t = t;
  const auto cells = static_cast<std::uint64_t>(g.cells());
  detail::get_field(in, "n", st.n.v, cells);
  detail::get_field(in, "c", st.c.v, cells);
  detail::get_field(in, "m", st.m.v, cells);
  detail::get_field(in, "p", st.p.v, cells);
  for (int a = 0; a < g.dim; ++a)
    detail::get_field(in, "u" + std::to_string(a), st.u.comp[a],
                      static_cast<std::uint64_t>(g.face_count(a)));
  return st;
}

inline void write_snapshot(const std::string& path, const SimState& st) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SnapshotError("snapshot: cannot open '" + path + "' for writing");
  write_snapshot(out, st);
  out.flush();
  if (!out) throw SnapshotError("snapshot: write to '" + path + "' failed");
}

inline SimState read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("snapshot: cannot open '" + path + "'");
  return read_snapshot(in);
}

}  // namespace coralsim
