#pragma once

#include "geosteer/encoder/model.hpp"
#include "geosteer/geom/pca.hpp"
#include "geosteer/io/binary.hpp"
#include "geosteer/solver/bridge.hpp"
#include "geosteer/synth/head.hpp"

#include <cstdio>

namespace geosteer::io {

// Checkpoint layout: a text header of `key=value` lines closed by "end\n",
// then u64 blob count and per blob u64 rows, u64 cols, f64 row-major, and a
// u32 CRC32 over every preceding byte. Encoder blobs: for the encoder then
// the decoder, each layer's weight and bias, then each norm's gamma, beta,
// running mean and running variance. Bridge blobs: each layer's weight and
// bias, then the loss trace as one row.

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("checkpoint: key '" + key + "' has non-numeric value '" + s + "'");
}

inline std::string join_widths(const std::vector<Index>& w) {
  std::string out;
  for (auto x : w) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

inline std::vector<Index> split_widths(const std::string& s, const std::string& key) {
  std::vector<Index> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = std::min(s.find(',', start), s.size());
    out.push_back(static_cast<Index>(parse_double(s.substr(start, comma - start), key)));
    start = comma + 1;
  }
  if (out.size() < 2) throw FormatError("checkpoint: key '" + key + "' needs at least two widths");
  return out;
}

inline std::vector<Index> mlp_widths(const encoder::Mlp& m) {
  std::vector<Index> w{m.in_dim()};
  for (const auto& l : m.layers) w.push_back(l.out());
  return w;
}

inline std::vector<unsigned char> encode_checkpoint(const Meta& header, const std::vector<const Matrix*>& blobs) {
  ByteWriter w;
  std::string text;
  for (const auto& [k, v] : header) {
    require(k.find('=') == std::string::npos && k.find('\n') == std::string::npos && v.find('\n') == std::string::npos,
            "checkpoint: header entries must be single-line key=value");
    text += k + "=" + v + "\n";
  }
  text += "end\n";
  w.raw(text.data(), text.size());
  w.le<std::uint64_t>(blobs.size());
  for (const Matrix* b : blobs) write_matrix_body(w, *b);
  w.crc();
  return w.bytes();
}

struct Checkpoint {
  Meta header;
  std::vector<Matrix> blobs;

  const std::string& at(const std::string& key) const {
    const auto it = header.find(key);
    if (it == header.end()) throw FormatError("checkpoint: header lacks '" + key + "'");
    return it->second;
  }
};

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& what = "checkpoint") {
  Checkpoint c;
  std::size_t pos = 0;
  for (;;) {
    const auto* begin = bytes.data() + pos;
    const auto* nl = static_cast<const unsigned char*>(std::memchr(begin, '\n', bytes.size() - pos));
    if (nl == nullptr) throw FormatError(what + ": header not terminated at offset " + std::to_string(pos));
    const std::string line(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nl - begin));
    const std::size_t line_start = pos;
    pos += line.size() + 1;
    if (line == "end") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(what + ": header line lacks '=' at offset " + std::to_string(line_start));
    c.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ByteReader r(bytes, what);
  r.need(pos);
  for (std::size_t i = 0; i < pos; ++i) r.le<std::uint8_t>();
  const auto n = r.le<std::uint64_t>();
  if (n * 16 > r.remaining()) r.fail("blob count " + std::to_string(n) + " exceeds the payload");
  for (std::uint64_t i = 0; i < n; ++i) c.blobs.push_back(read_matrix_body(r));
  r.finish();
  return c;
}

inline void save_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  ByteWriter w;
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline std::vector<unsigned char> load_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// `extra` entries (for example the training config) are stored verbatim.
inline std::vector<unsigned char> encode_encoder(const encoder::EncoderModel& m, const Meta& extra = {}) {
  Meta h = extra;
  h["kind"] = "encoder";
  h["supervision"] = encoder::to_string(m.supervision);
  h["ambient"] = m.ambient;
  h["encoder_widths"] = join_widths(mlp_widths(m.encoder));
  h["decoder_widths"] = join_widths(mlp_widths(m.decoder));
  h["norm_eps"] = format_double(m.encoder.eps);
  h["norm_momentum"] = format_double(m.encoder.momentum);
  std::vector<const Matrix*> blobs;
  std::vector<Matrix> owned;
  owned.reserve(4 * (m.encoder.norms.size() + m.decoder.norms.size()));
  for (const encoder::Mlp* mlp : {&m.encoder, &m.decoder}) {
    for (const auto& l : mlp->layers) blobs.push_back(&l.weight), blobs.push_back(&l.bias);
    for (const auto& n : mlp->norms) {
      blobs.push_back(&n.gamma), blobs.push_back(&n.beta);
      owned.emplace_back(n.running_mean);
      blobs.push_back(&owned.back());
      owned.emplace_back(n.running_var);
      blobs.push_back(&owned.back());
    }
  }
  return encode_checkpoint(h, blobs);
}

inline encoder::EncoderModel decode_encoder(const Checkpoint& c) {
  if (c.at("kind") != "encoder") throw FormatError("checkpoint: expected kind=encoder, found '" + c.at("kind") + "'");
  encoder::EncoderModel m;
  try {
    m.supervision = encoder::supervision_from_string(c.at("supervision"));
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  m.ambient = c.at("ambient");
  std::size_t next = 0;
  auto take = [&](Index rows, Index cols, const std::string& what) {
    if (next >= c.blobs.size()) throw FormatError("checkpoint: missing blob for " + what);
    const Matrix& b = c.blobs[next++];
    if (b.rows() != rows || b.cols() != cols)
      throw FormatError("checkpoint: " + what + " is " + shape_str(b) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    return b;
  };
  const double eps = parse_double(c.at("norm_eps"), "norm_eps");
  const double momentum = parse_double(c.at("norm_momentum"), "norm_momentum");
  for (auto [mlp, key] : {std::pair{&m.encoder, "encoder_widths"}, std::pair{&m.decoder, "decoder_widths"}}) {
    const auto w = split_widths(c.at(key), key);
    mlp->eps = eps, mlp->momentum = momentum;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      encoder::Dense d;
      d.weight = take(w[l], w[l + 1], std::string(key) + " weight " + std::to_string(l));
      d.bias = take(1, w[l + 1], std::string(key) + " bias " + std::to_string(l));
      mlp->layers.push_back(std::move(d));
    }
    for (std::size_t l = 1; l + 1 < w.size(); ++l) {
      encoder::Norm n;
      const std::string tag = std::string(key) + " norm " + std::to_string(l - 1);
      n.gamma = take(1, w[l], tag + " gamma");
      n.beta = take(1, w[l], tag + " beta");
      n.running_mean = take(1, w[l], tag + " mean").row(0);
      n.running_var = take(1, w[l], tag + " var").row(0);
      mlp->norms.push_back(std::move(n));
    }
  }
  if (next != c.blobs.size()) throw FormatError("checkpoint: " + std::to_string(c.blobs.size() - next) + " unused blobs");
  return m;
}

inline void save_encoder(const std::string& path, const encoder::EncoderModel& m, const Meta& extra = {}) {
  save_bytes(path, encode_encoder(m, extra));
}

inline encoder::EncoderModel load_encoder(const std::string& path) {
  return decode_encoder(decode_checkpoint(load_bytes(path), path));
}

inline std::vector<unsigned char> encode_bridge(const solver::BridgeModel& b, const Meta& extra = {}) {
  Meta h = extra;
  h["kind"] = "bridge";
  h["envelope_q"] = std::to_string(b.envelope_q);
  std::vector<Index> widths{b.layers.front().in()};
  for (const auto& l : b.layers) widths.push_back(l.out());
  h["widths"] = join_widths(widths);
  std::vector<const Matrix*> blobs;
  for (const auto& l : b.layers) blobs.push_back(&l.weight), blobs.push_back(&l.bias);
  Matrix trace(1, static_cast<Index>(b.loss_trace.size()));
  for (std::size_t i = 0; i < b.loss_trace.size(); ++i) trace(0, static_cast<Index>(i)) = b.loss_trace[i];
  blobs.push_back(&trace);
  return encode_checkpoint(h, blobs);
}

/// The bridge's encoder is stored separately and supplied on load.
inline solver::BridgeModel decode_bridge(const Checkpoint& c, std::shared_ptr<const encoder::EncoderModel> enc) {
  if (c.at("kind") != "bridge") throw FormatError("checkpoint: expected kind=bridge, found '" + c.at("kind") + "'");
  require(enc != nullptr, "decode_bridge: null encoder");
  const auto w = split_widths(c.at("widths"), "widths");
  if (w.front() != 2 * enc->latent_dim() + 1 || w.back() != enc->ambient_dim())
    throw FormatError("checkpoint: bridge widths do not fit the supplied encoder");
  if (c.blobs.size() != 2 * (w.size() - 1) + 1)
    throw FormatError("checkpoint: bridge expects " + std::to_string(2 * (w.size() - 1) + 1) + " blobs, found " +
                      std::to_string(c.blobs.size()));
  solver::BridgeModel b;
  b.encoder = std::move(enc);
  b.envelope_q = static_cast<int>(parse_double(c.at("envelope_q"), "envelope_q"));
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const Matrix& wt = c.blobs[2 * l];
    const Matrix& bias = c.blobs[2 * l + 1];
    if (wt.rows() != w[l] || wt.cols() != w[l + 1] || bias.rows() != 1 || bias.cols() != w[l + 1])
      throw FormatError("checkpoint: bridge layer " + std::to_string(l) + " has the wrong shape");
    b.layers.push_back({wt, bias});
  }
  const Matrix& trace = c.blobs.back();
  b.loss_trace.assign(trace.data(), trace.data() + trace.size());
  return b;
}

inline void save_bridge(const std::string& path, const solver::BridgeModel& b, const Meta& extra = {}) {
  save_bytes(path, encode_bridge(b, extra));
}

inline solver::BridgeModel load_bridge(const std::string& path, std::shared_ptr<const encoder::EncoderModel> enc) {
  return decode_bridge(decode_checkpoint(load_bytes(path), path), std::move(enc));
}

inline void require_kind(const Checkpoint& c, const std::string& kind, std::size_t blobs) {
  if (c.at("kind") != kind) throw FormatError("checkpoint: expected kind=" + kind + ", found '" + c.at("kind") + "'");
  if (c.blobs.size() != blobs)
    throw FormatError("checkpoint: " + kind + " expects " + std::to_string(blobs) + " blobs, found " +
                      std::to_string(c.blobs.size()));
}

inline std::vector<unsigned char> encode_head(const synth::BehaviorHead& h, const Meta& extra = {}) {
  Meta m = extra;
  m["kind"] = "head";
  m["temperature"] = format_double(h.temperature());
  m["other_logit"] = format_double(h.other_logit());
  return encode_checkpoint(m, {&h.anchors()});
}

inline synth::BehaviorHead decode_head(const Checkpoint& c) {
  require_kind(c, "head", 1);
  try {
    return synth::BehaviorHead(c.blobs[0], parse_double(c.at("temperature"), "temperature"),
                               parse_double(c.at("other_logit"), "other_logit"));
  } catch (const FormatError&) {
    throw;
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline std::vector<unsigned char> encode_pca(const geom::PcaModel& p, const Meta& extra = {}) {
  Meta m = extra;
  m["kind"] = "pca";
  m["rank"] = std::to_string(p.rank());
  Matrix mean = p.mean.transpose(), variance = p.explained_variance.transpose();
  return encode_checkpoint(m, {&mean, &p.components, &variance});
}

inline geom::PcaModel decode_pca(const Checkpoint& c) {
  require_kind(c, "pca", 3);
  geom::PcaModel p;
  if (c.blobs[0].rows() != 1 || c.blobs[1].cols() != c.blobs[0].cols() || c.blobs[2].rows() != 1 ||
      c.blobs[2].cols() != c.blobs[1].rows())
    throw FormatError("checkpoint: PCA mean and components disagree on the dimension");
  p.mean = c.blobs[0].row(0).transpose();
  p.components = c.blobs[1];
  p.explained_variance = c.blobs[2].row(0).transpose();
  return p;
}

}  // namespace geosteer::io
