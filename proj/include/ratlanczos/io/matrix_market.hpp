#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ratlanczos/errors.hpp"
#include "ratlanczos/sparse_sym.hpp"

namespace ratlanczos::io {

enum class MtxFormat { coordinate, array };
enum class MtxField { real, integer, pattern };
enum class MtxSymmetry { general, symmetric };

/// Contents of a Matrix Market file with symmetric storage expanded.
struct MtxData {
  Index rows = 0, cols = 0;
  MtxFormat format = MtxFormat::coordinate;
  MtxField field = MtxField::real;
  MtxSymmetry symmetry = MtxSymmetry::general;
  std::vector<Triplet> entries;  // both triangles, 0-based
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline MtxData read_matrix_market(std::istream& in, const std::string& name = "<stream>") {
  std::string header;
  if (!std::getline(in, header)) throw IoError(name + ": empty Matrix Market file");
  std::istringstream hs(detail::lower(header));
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix") {
    throw IoError(name + ": missing %%MatrixMarket matrix header");
  }
  MtxData d;
  if (format == "coordinate") d.format = MtxFormat::coordinate;
  else if (format == "array") d.format = MtxFormat::array;
  else throw IoError(name + ": unsupported format '" + format + "'");
  if (field == "real" || field == "double") d.field = MtxField::real;
  else if (field == "integer") d.field = MtxField::integer;
  else if (field == "pattern") d.field = MtxField::pattern;
  else throw IoError(name + ": unsupported field '" + field + "'");
  if (symmetry == "general") d.symmetry = MtxSymmetry::general;
  else if (symmetry == "symmetric") d.symmetry = MtxSymmetry::symmetric;
  else throw IoError(name + ": unsupported symmetry '" + symmetry + "'");
  if (d.format == MtxFormat::array && d.field == MtxField::pattern) {
    throw IoError(name + ": pattern field requires coordinate format");
  }

  std::string line;
  if (!detail::next_data_line(in, line)) throw IoError(name + ": missing size line");
  std::istringstream ss(line);
  long long rows = 0, cols = 0, nnz = 0;
  ss >> rows >> cols;
  if (d.format == MtxFormat::coordinate) ss >> nnz;
  if (!ss || rows < 0 || cols < 0 || nnz < 0) throw IoError(name + ": malformed size line");
  d.rows = rows;
  d.cols = cols;
  if (d.symmetry == MtxSymmetry::symmetric && rows != cols) {
    throw IoError(name + ": symmetric storage requires a square matrix");
  }

  auto add = [&](Index i, Index j, double v) {
    d.entries.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    if (d.symmetry == MtxSymmetry::symmetric && i != j) {
      d.entries.emplace_back(static_cast<int>(j), static_cast<int>(i), v);
    }
  };

  if (d.format == MtxFormat::coordinate) {
    d.entries.reserve(static_cast<std::size_t>(nnz) * (d.symmetry == MtxSymmetry::symmetric ? 2 : 1));
    for (long long k = 0; k < nnz; ++k) {
      if (!detail::next_data_line(in, line)) {
        throw IoError(name + ": expected " + std::to_string(nnz) + " entries, found " + std::to_string(k));
      }
      std::istringstream es(line);
      long long i = 0, j = 0;
      double v = 1.0;
      es >> i >> j;
      if (d.field != MtxField::pattern) es >> v;
      if (!es || i < 1 || j < 1 || i > rows || j > cols) {
        throw IoError(name + ": bad entry on data line " + std::to_string(k + 1));
      }
      if (d.symmetry == MtxSymmetry::symmetric && j > i) {
        throw IoError(name + ": symmetric storage must list the lower triangle only");
      }
      add(i - 1, j - 1, v);
    }
  } else {
    // Column-major values; symmetric storage lists the lower triangle.
    for (Index j = 0; j < d.cols; ++j) {
      for (Index i = d.symmetry == MtxSymmetry::symmetric ? j : 0; i < d.rows; ++i) {
        if (!detail::next_data_line(in, line)) throw IoError(name + ": array data ended early");
        std::istringstream es(line);
        double v = 0.0;
        es >> v;
        if (!es) throw IoError(name + ": bad array value");
        if (v != 0.0) add(i, j, v);
      }
    }
  }
  return d;
}

inline MtxData read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_matrix_market(in, path);
}

inline SparseSym to_sparse_sym(const MtxData& d, Definiteness hint = Definiteness::unknown) {
  if (d.rows != d.cols) throw DimensionError("Matrix Market data is not square");
  return SparseSym::from_triplets(d.rows, d.entries, hint);
}

inline Matrix to_dense(const MtxData& d) {
  Matrix m = Matrix::Zero(d.rows, d.cols);
  for (const Triplet& t : d.entries) m(t.row(), t.col()) += t.value();
  return m;
}

inline SparseSym read_sparse_sym(const std::string& path, Definiteness hint = Definiteness::unknown) {
  return to_sparse_sym(read_matrix_market(path), hint);
}

inline Matrix read_dense_mtx(const std::string& path) { return to_dense(read_matrix_market(path)); }

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Coordinate format; symmetric storage writes the lower triangle.
inline void write_matrix_market(std::ostream& out, const SparseSym& a, bool symmetric_storage = true) {
  const CsrMatrix& m = a.csr();
  Index count = 0;
  for (Index r = 0; r < m.outerSize(); ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it)
      if (!symmetric_storage || it.col() <= r) ++count;
  out << "%%MatrixMarket matrix coordinate real " << (symmetric_storage ? "symmetric" : "general") << "\n";
  out << a.size() << " " << a.size() << " " << count << "\n";
  for (Index r = 0; r < m.outerSize(); ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it)
      if (!symmetric_storage || it.col() <= r)
        out << r + 1 << " " << it.col() + 1 << " " << detail::fmt17(it.value()) << "\n";
}

inline void write_matrix_market(std::ostream& out, const Matrix& m) {
  out << "%%MatrixMarket matrix array real general\n";
  out << m.rows() << " " << m.cols() << "\n";
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) out << detail::fmt17(m(i, j)) << "\n";
}

template <class M>
void write_matrix_market_file(const std::string& path, const M& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_matrix_market(out, m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ratlanczos::io
