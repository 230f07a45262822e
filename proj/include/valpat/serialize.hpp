#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "valpat/common.hpp"

namespace valpat {

/// Little-endian binary stream helpers used by the checkpoint and embedding
/// file formats. Matrices are written row-major regardless of the in-memory
/// layout.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void write_bytes(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    VALPAT_REQUIRE(out_.good(), "binary write failed");
  }

  void write_u32(std::uint32_t v) { write_bytes(&v, sizeof v); }
  void write_u64(std::uint64_t v) { write_bytes(&v, sizeof v); }
  void write_i64(std::int64_t v) { write_bytes(&v, sizeof v); }
  void write_f64(double v) { write_bytes(&v, sizeof v); }
  void write_f32(float v) { write_bytes(&v, sizeof v); }

  void write_string(const std::string& s) {
    write_u64(s.size());
    if (!s.empty()) write_bytes(s.data(), s.size());
  }

  template <class S>
  void write_matrix(const MatrixX<S>& m) {
    write_u64(static_cast<std::uint64_t>(m.rows()));
    write_u64(static_cast<std::uint64_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) write_f64(static_cast<double>(m(r, c)));
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in, std::string what = "stream")
      : in_(in), what_(std::move(what)) {}

  void read_bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    VALPAT_REQUIRE(in_.gcount() == static_cast<std::streamsize>(size),
                   "corrupt or truncated ", what_);
  }

  std::uint32_t read_u32() { std::uint32_t v; read_bytes(&v, sizeof v); return v; }
  std::uint64_t read_u64() { std::uint64_t v; read_bytes(&v, sizeof v); return v; }
  std::int64_t read_i64() { std::int64_t v; read_bytes(&v, sizeof v); return v; }
  double read_f64() { double v; read_bytes(&v, sizeof v); return v; }
  float read_f32() { float v; read_bytes(&v, sizeof v); return v; }

  std::string read_string(std::uint64_t max_size = (1ull << 32)) {
    const std::uint64_t size = read_u64();
    VALPAT_REQUIRE(size <= max_size, "corrupt ", what_, ": unreasonable string length");
    std::string s(size, '\0');
    if (size > 0) read_bytes(s.data(), size);
    return s;
  }

  template <class S>
  MatrixX<S> read_matrix(std::uint64_t max_elems = (1ull << 32)) {
    const std::uint64_t rows = read_u64();
    const std::uint64_t cols = read_u64();
    VALPAT_REQUIRE(rows * cols <= max_elems, "corrupt ", what_, ": unreasonable matrix size");
    MatrixX<S> m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(read_f64());
    return m;
  }

  bool at_eof() {
    return in_.peek() == std::char_traits<char>::eof();
  }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace valpat
