#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "field.hpp"

namespace cgolab::io {

// File layout, all little-endian:
//   "CGOF" | u16 version | u8 kind | 3 x u32 dims | 6 x f64 bounds (lower xyz, upper xyz)
//   kind 0: N complex samples
//   kind 1: three blocks of N complex samples (x, y, z components)
//   kind 2: three blocks of N complex samples (01, 02, 12 components)
//   kind 3: u32 m | m x u32 boundary node indices | m*m complex entries, column-major
// Complex samples are (re, im) f64 pairs in x-fastest node order.
enum class Kind : std::uint8_t { Scalar = 0, Vector = 1, TwoForm = 2, DenseMatrix = 3 };

inline constexpr std::uint16_t kFormatVersion = 1;

struct Header {
  std::uint16_t version = kFormatVersion;
  Kind kind = Kind::Scalar;
  std::array<std::uint32_t, 3> dims{};
  Vec3 lower{}, upper{};

  DomainSpec domain() const {
    return make_domain(lower, upper, {static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])});
  }
};

// Dense matrix indexed by boundary nodes of a grid.
struct BoundaryMatrix {
  Grid grid;
  std::vector<std::size_t> nodes;
  std::vector<cplx> entries;  // column-major, nodes.size() squared
};

namespace detail {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int b = 0; b < 2; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void c128(cplx z) {
    f64(z.real());
    f64(z.imag());
  }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> b) : buf_(std::move(b)) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int b = 0; b < 2; ++b) v |= static_cast<std::uint16_t>(u8()) << (8 * b);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(u8()) << (8 * b);
    return v;
  }
  double f64() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(u8()) << (8 * b);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  cplx c128() {
    double re = f64();
    return {re, f64()};
  }
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("field file is truncated");
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

inline void write_header(Writer& w, Kind kind, const Grid& g) {
  w.bytes("CGOF", 4);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  for (int d = 0; d < 3; ++d) w.u32(static_cast<std::uint32_t>(g.n(d)));
  for (int d = 0; d < 3; ++d) w.f64(g.spec().lower[d]);
  for (int d = 0; d < 3; ++d) w.f64(g.spec().upper[d]);
}

inline Header read_header(Reader& r) {
  char magic[4];
  for (auto& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, "CGOF", 4) != 0) throw FormatError("bad magic: not a field file");
  Header h;
  h.version = r.u16();
  if (h.version != kFormatVersion) throw FormatError("unsupported field file version " + std::to_string(h.version));
  auto k = r.u8();
  if (k > 3) throw FormatError("unknown field kind " + std::to_string(k));
  h.kind = static_cast<Kind>(k);
  for (auto& d : h.dims) d = r.u32();
  for (int d = 0; d < 3; ++d) h.lower[d] = r.f64();
  for (int d = 0; d < 3; ++d) h.upper[d] = r.f64();
  for (int d = 0; d < 3; ++d)
    if (h.dims[d] < 2 || !(h.upper[d] > h.lower[d])) throw FormatError("invalid grid in field header");
  return h;
}

inline void save(const std::string& path, const Writer& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!os) throw IoError("write failed for " + path);
}

inline Reader load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<char> b((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return Reader(std::move(b));
}

inline void write_block(Writer& w, const std::vector<cplx>& v) {
  for (auto z : v) w.c128(z);
}

inline std::vector<cplx> read_block(Reader& r, std::size_t n) {
  r.need(n * 16);
  std::vector<cplx> v(n);
  for (auto& z : v) z = r.c128();
  return v;
}

inline void expect(const Header& h, Kind k) {
  if (h.kind != k)
    throw FormatError("field kind mismatch: file has kind " + std::to_string(static_cast<int>(h.kind)) +
                      ", expected " + std::to_string(static_cast<int>(k)));
}

inline void expect_end(const Reader& r) {
  if (r.remaining() != 0) throw FormatError("trailing bytes after field payload");
}

}  // namespace detail

inline std::vector<char> encode(const ScalarField& f) {
  detail::Writer w;
  detail::write_header(w, Kind::Scalar, f.grid());
  detail::write_block(w, f.data());
  return w.buffer();
}

inline void write_field(const std::string& path, const ScalarField& f) {
  detail::Writer w;
  detail::write_header(w, Kind::Scalar, f.grid());
  detail::write_block(w, f.data());
  detail::save(path, w);
}

inline void write_field(const std::string& path, const VectorField& f) {
  detail::Writer w;
  detail::write_header(w, Kind::Vector, f.grid());
  for (int d = 0; d < 3; ++d) detail::write_block(w, f.comp(d));
  detail::save(path, w);
}

inline void write_field(const std::string& path, const TwoFormField& f) {
  detail::Writer w;
  detail::write_header(w, Kind::TwoForm, f.grid());
  for (int s = 0; s < 3; ++s) detail::write_block(w, f.comp(s));
  detail::save(path, w);
}

inline void write_matrix(const std::string& path, const BoundaryMatrix& m) {
  const std::size_t nb = m.nodes.size();
  if (m.entries.size() != nb * nb) throw ValidationError("boundary matrix: entry count does not match node count");
  detail::Writer w;
  detail::write_header(w, Kind::DenseMatrix, m.grid);
  w.u32(static_cast<std::uint32_t>(nb));
  for (auto idx : m.nodes) w.u32(static_cast<std::uint32_t>(idx));
  detail::write_block(w, m.entries);
  detail::save(path, w);
}

inline Header read_header(const std::string& path) {
  auto r = detail::load(path);
  return detail::read_header(r);
}

inline ScalarField read_scalar(const std::string& path) {
  auto r = detail::load(path);
  auto h = detail::read_header(r);
  detail::expect(h, Kind::Scalar);
  Grid g(h.domain());
  ScalarField f(g, detail::read_block(r, g.size()));
  detail::expect_end(r);
  return f;
}

inline VectorField read_vector(const std::string& path) {
  auto r = detail::load(path);
  auto h = detail::read_header(r);
  detail::expect(h, Kind::Vector);
  Grid g(h.domain());
  VectorField f(g);
  for (int d = 0; d < 3; ++d) f.comp(d) = detail::read_block(r, g.size());
  detail::expect_end(r);
  return f;
}

inline TwoFormField read_two_form(const std::string& path) {
  auto r = detail::load(path);
  auto h = detail::read_header(r);
  detail::expect(h, Kind::TwoForm);
  Grid g(h.domain());
  TwoFormField f(g);
  for (int s = 0; s < 3; ++s) f.comp(s) = detail::read_block(r, g.size());
  detail::expect_end(r);
  return f;
}

inline BoundaryMatrix read_matrix(const std::string& path) {
  auto r = detail::load(path);
  auto h = detail::read_header(r);
  detail::expect(h, Kind::DenseMatrix);
  BoundaryMatrix m{Grid(h.domain()), {}, {}};
  std::uint32_t nb = r.u32();
  r.need(static_cast<std::size_t>(nb) * 4);
  for (std::uint32_t i = 0; i < nb; ++i) {
    std::size_t idx = r.u32();
    if (idx >= m.grid.size() || !m.grid.on_boundary(idx)) throw FormatError("boundary index table refers to a non-boundary node");
    m.nodes.push_back(idx);
  }
  m.entries = detail::read_block(r, static_cast<std::size_t>(nb) * nb);
  detail::expect_end(r);
  return m;
}

}  // namespace cgolab::io
