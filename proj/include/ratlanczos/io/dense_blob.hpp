#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ratlanczos/errors.hpp"
#include "ratlanczos/sparse_sym.hpp"

namespace ratlanczos::io {

/// Binary dense matrix: uint32 rows, uint32 cols (little endian), then
/// rows * cols little-endian doubles in column-major order.
namespace detail {

template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

}  // namespace detail

inline void write_dense_blob(const std::string& path, const Matrix& m) {
  if (m.rows() > 0xffffffffLL || m.cols() > 0xffffffffLL) throw IoError("dense blob: matrix too large");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::uint32_t hdr[2] = {detail::byteswap_if_big(static_cast<std::uint32_t>(m.rows())),
                                detail::byteswap_if_big(static_cast<std::uint32_t>(m.cols()))};
  out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double v = detail::byteswap_if_big(m(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Matrix read_dense_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::uint32_t hdr[2];
  if (!in.read(reinterpret_cast<char*>(hdr), sizeof hdr)) throw IoError(path + ": truncated header");
  const Index rows = detail::byteswap_if_big(hdr[0]);
  const Index cols = detail::byteswap_if_big(hdr[1]);
  Matrix m(rows, cols);
  std::vector<double> buf(static_cast<std::size_t>(rows));
  for (Index j = 0; j < cols; ++j) {
    if (rows > 0 && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(rows * 8))) {
      throw IoError(path + ": truncated data");
    }
    for (Index i = 0; i < rows; ++i) m(i, j) = detail::byteswap_if_big(buf[static_cast<std::size_t>(i)]);
  }
  in.peek();
  if (!in.eof()) throw IoError(path + ": trailing bytes after matrix data");
  return m;
}

}  // namespace ratlanczos::io
