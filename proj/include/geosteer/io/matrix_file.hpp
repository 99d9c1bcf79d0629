#pragma once

#include "geosteer/geom/distance_matrix.hpp"
#include "geosteer/io/binary.hpp"
#include "geosteer/solver/path.hpp"

namespace geosteer::io {

// GDMX layout: "GDMX" u16 version, u64 source code, u64 rows, u64 cols,
// f64[rows*cols] row-major, u32 CRC32.
inline std::uint64_t source_code(geom::DistanceSource s) {
  switch (s) {
    case geom::DistanceSource::phate: return 0;
    case geom::DistanceSource::output_hellinger: return 1;
    case geom::DistanceSource::ground_truth: return 2;
  }
  return 2;
}

inline std::vector<unsigned char> encode_distance_matrix(const geom::DistanceMatrix& d) {
  ByteWriter w;
  w.raw("GDMX", 4);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint64_t>(source_code(d.source()));
  write_matrix_body(w, d.values());
  w.crc();
  return w.bytes();
}

inline geom::DistanceMatrix decode_distance_matrix(ByteReader r) {
  r.header("GDMX");
  const auto code = r.le<std::uint64_t>();
  if (code > 2) r.fail("unknown distance source code " + std::to_string(code));
  Matrix m = read_matrix_body(r);
  r.finish();
  const geom::DistanceSource src = code == 0   ? geom::DistanceSource::phate
                                   : code == 1 ? geom::DistanceSource::output_hellinger
                                               : geom::DistanceSource::ground_truth;
  try {
    return geom::DistanceMatrix(std::move(m), src);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("distance matrix content invalid: ") + e.what());
  }
}

inline void save_distance_matrix(const std::string& path, const geom::DistanceMatrix& d) {
  ByteWriter w;
  const auto bytes = encode_distance_matrix(d);
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline geom::DistanceMatrix load_distance_matrix(const std::string& path) {
  return decode_distance_matrix(ByteReader::load(path));
}

// GPTH layout: "GPTH" u16 version, u64 paths, then per path: u64 flagged,
// u64 rows, u64 cols, f64 waypoints row-major, u64 trace length, f64 trace;
// u32 CRC32. Solver tags and notes live in the metadata sidecar.
inline std::vector<unsigned char> encode_paths(const std::vector<solver::GeodesicPath>& paths) {
  ByteWriter w;
  w.raw("GPTH", 4);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint64_t>(paths.size());
  for (const auto& p : paths) {
    w.le<std::uint64_t>(p.flagged ? 1 : 0);
    write_matrix_body(w, p.waypoints);
    w.le<std::uint64_t>(p.length_trace.size());
    w.f64s(p.length_trace.data(), p.length_trace.size());
  }
  w.crc();
  return w.bytes();
}

inline std::vector<solver::GeodesicPath> decode_paths(ByteReader r) {
  r.header("GPTH");
  const auto n = r.le<std::uint64_t>();
  if (n * 32 > r.remaining()) r.fail("path count " + std::to_string(n) + " exceeds the payload");
  std::vector<solver::GeodesicPath> out(n);
  for (auto& p : out) {
    const auto flag = r.le<std::uint64_t>();
    if (flag > 1) r.fail("flag word " + std::to_string(flag) + " is not 0 or 1");
    p.flagged = flag == 1;
    p.waypoints = read_matrix_body(r);
    const auto t = r.le<std::uint64_t>();
    if (t * 8 > r.remaining()) r.fail("trace length " + std::to_string(t) + " exceeds the payload");
    p.length_trace.resize(t);
    r.f64s(p.length_trace.data(), t);
  }
  r.finish();
  return out;
}

inline void save_paths(const std::string& path, const std::vector<solver::GeodesicPath>& paths) {
  ByteWriter w;
  const auto bytes = encode_paths(paths);
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline std::vector<solver::GeodesicPath> load_paths(const std::string& path) { return decode_paths(ByteReader::load(path)); }

}  // namespace geosteer::io
