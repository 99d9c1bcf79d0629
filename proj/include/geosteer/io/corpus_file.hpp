#pragma once

#include "geosteer/io/binary.hpp"
#include "geosteer/synth/corpus.hpp"

namespace geosteer::io {

// GACT layout (little-endian):
//   "GACT" u16 version
//   u64 n, u64 D, u64 classes, u64 topology (0 cyclic, 1 sequential)
//   f64[n*D] points, row-major
//   u64[n] labels, u64[n] paraphrase ids, u64[n] split (0 train, 1 val)
//   u32 CRC32 of everything above
inline std::vector<unsigned char> encode_corpus(const synth::ActivationCorpus& c) {
  c.validate();
  ByteWriter w;
  w.raw("GACT", 4);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint64_t>(c.size());
  w.le<std::uint64_t>(c.dim());
  w.le<std::uint64_t>(c.classes);
  w.le<std::uint64_t>(c.topology == synth::Topology::cyclic ? 0 : 1);
  w.f64s(c.points.data(), static_cast<std::size_t>(c.points.size()));
  w.u64s(c.labels);
  w.u64s(c.paraphrase);
  std::vector<std::size_t> split(c.size(), 0);
  for (auto i : c.val) split[i] = 1;
  w.u64s(split);
  w.crc();
  return w.bytes();
}

inline synth::ActivationCorpus decode_corpus(ByteReader r) {
  r.header("GACT");
  const auto n = r.le<std::uint64_t>();
  const auto d = r.le<std::uint64_t>();
  const std::size_t dims_end = r.offset();
  synth::ActivationCorpus c;
  c.classes = r.le<std::uint64_t>();
  const auto topo = r.le<std::uint64_t>();
  if (topo > 1) r.fail("unknown topology code " + std::to_string(topo));
  c.topology = topo == 0 ? synth::Topology::cyclic : synth::Topology::sequential;
  if (n == 0 || d == 0 || d > (1u << 20) || n > (1u << 24)) r.fail("implausible dimensions n=" + std::to_string(n) + " D=" + std::to_string(d));
  const std::uint64_t expected = n * d * 8 + 3 * n * 8 + 4;
  if (r.remaining() != expected)
    r.fail("dimension mismatch: header declares n=" + std::to_string(n) + " D=" + std::to_string(d) + " (header ends at " +
           std::to_string(dims_end) + ") but " + std::to_string(r.remaining()) + " bytes follow");
  c.points.resize(static_cast<Index>(n), static_cast<Index>(d));
  r.f64s(c.points.data(), n * d);
  c.labels = r.u64s(n);
  c.paraphrase = r.u64s(n);
  const auto split = r.u64s(n);
  r.finish();
  for (std::size_t i = 0; i < n; ++i) {
    if (split[i] > 1) throw FormatError("corpus: split flag " + std::to_string(split[i]) + " at point " + std::to_string(i));
    (split[i] ? c.val : c.train).push_back(i);
  }
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("corpus content invalid: ") + e.what());
  }
  return c;
}

inline void save_corpus(const std::string& path, const synth::ActivationCorpus& c) {
  ByteWriter w;
  const auto bytes = encode_corpus(c);
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline synth::ActivationCorpus load_corpus(const std::string& path) { return decode_corpus(ByteReader::load(path)); }

}  // namespace geosteer::io

namespace geosteer::synth {

/// Loads a corpus written in the GACT format (for example by an external
/// activation extractor).
inline ActivationCorpus import_corpus(const std::string& path) { return io::load_corpus(path); }

}  // namespace geosteer::synth
