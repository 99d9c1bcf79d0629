#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace geosteer::io {

/// Raised on malformed or corrupted files; the message carries the byte offset.
class FormatError : public ContractViolation {
public:
  using ContractViolation::ContractViolation;
};

inline constexpr std::uint16_t kFormatVersion = 1;

class ByteWriter {
public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
  }
  void u64s(const std::vector<std::size_t>& v) {
    for (auto x : v) le<std::uint64_t>(x);
  }
  void crc() { le<std::uint32_t>(crc32_of(bytes_.data(), bytes_.size())); }

  static std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    while (n > 0) {
      const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
      c = ::crc32(c, p, chunk);
      p += chunk;
      n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
  }

  const std::vector<unsigned char>& bytes() const { return bytes_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
  }

private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
public:
  explicit ByteReader(std::vector<unsigned char> bytes, std::string what = "file")
      : bytes_(std::move(bytes)), what_(std::move(what)) {}

  static ByteReader load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes), path);
  }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      fail("truncated: need " + std::to_string(n) + " bytes, " + std::to_string(bytes_.size() - pos_) + " left");
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  void f64s(double* p, std::size_t n) {
    need(8 * n);
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }
  std::vector<std::size_t> u64s(std::size_t n) {
    need(8 * n);
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = static_cast<std::size_t>(le<std::uint64_t>());
    return v;
  }

  /// Checks the 4-byte magic and the version word.
  void header(const char (&magic)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) fail(std::string("bad magic, expected ") + magic);
    pos_ += 4;
    const auto version = le<std::uint16_t>();
    if (version != kFormatVersion) {
      pos_ -= 2;
      fail("unsupported format version " + std::to_string(version));
    }
  }

  /// Verifies the trailing CRC32 and that nothing follows it.
  void finish() {
    const std::size_t body = pos_;
    const auto stored = le<std::uint32_t>();
    if (stored != ByteWriter::crc32_of(bytes_.data(), body)) {
      pos_ = body;
      fail("CRC32 mismatch");
    }
    if (pos_ != bytes_.size()) fail("trailing bytes after checksum");
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(what_ + ": " + msg + " at offset " + std::to_string(pos_));
  }

private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

/// Sidecar metadata: one `key=value` per line, keys sorted.
using Meta = std::map<std::string, std::string>;

inline void save_meta(const std::string& path, const Meta& meta) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
}

inline Meta load_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  Meta meta;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path + ": line " + std::to_string(lineno) + " lacks '='");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

/// Matrix body shared by the matrix and path formats: u64 rows, u64 cols, payload.
inline void write_matrix_body(ByteWriter& w, const Matrix& m) {
  w.le<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  w.le<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
  w.f64s(m.data(), static_cast<std::size_t>(m.size()));
}

inline Matrix read_matrix_body(ByteReader& r, std::uint64_t max_elems = 1ull << 32) {
  const auto rows = r.le<std::uint64_t>();
  const auto cols = r.le<std::uint64_t>();
  if (rows != 0 && cols > max_elems / rows) r.fail("dimensions " + std::to_string(rows) + "x" + std::to_string(cols) + " too large");
  if (rows * cols * 8 > r.remaining()) r.fail("payload shorter than " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  r.f64s(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

}  // namespace geosteer::io
