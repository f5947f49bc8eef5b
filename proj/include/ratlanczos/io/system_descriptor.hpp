#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ratlanczos/control.hpp"
#include "ratlanczos/io/dense_blob.hpp"
#include "ratlanczos/io/matrix_market.hpp"

namespace ratlanczos::io {

/// Plain-text "key = value" description of an LTI system. Values are either
/// inline numbers (rows separated by ';') or paths, relative to the
/// descriptor, of Matrix Market (.mtx) or dense blob (.bin) files.
///
///   A = a.mtx            required, symmetric
///   B = b.mtx            n x p
///   C = c.mtx            q x n
///   E = e.mtx            diagonal of the mass matrix (n entries)
///   R = 1                p x p input weight
///   x0 = x0.mtx          initial state
///   hint = negative      definiteness of A
///   B1, B2, C1, C2       affine parametric blocks
///   nodes, weights       quadrature rule
///   bpoly, cpoly         b(mu) = (c0 + c1 mu + ...) I, likewise c(mu)
struct SystemDescriptor {
  LtiSystem sys;
  std::optional<ParametricIO> param;
  std::map<std::string, std::string> entries;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<Matrix> parse_inline(const std::string& value) {
  std::vector<std::vector<double>> rows(1);
  std::string token;
  std::istringstream ss(value);
  while (ss >> token) {
    std::size_t pos = 0;
    while (pos < token.size()) {
      if (token[pos] == ';') {
        rows.emplace_back();
        ++pos;
        continue;
      }
      const auto semi = token.find(';', pos);
      const std::string num = token.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(num, &used);
      } catch (const std::exception&) {
        return std::nullopt;
      }
      if (used != num.size()) return std::nullopt;
      rows.back().push_back(v);
      pos = semi == std::string::npos ? token.size() : semi;
    }
  }
  if (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) return std::nullopt;
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw IoError("descriptor: ragged inline matrix '" + value + "'");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

inline Matrix load_matrix(const std::string& value, const std::filesystem::path& base) {
  if (auto m = parse_inline(value)) return *m;
  const std::filesystem::path p = std::filesystem::path(value).is_absolute() ? std::filesystem::path(value) : base / value;
  if (p.extension() == ".bin") return read_dense_blob(p.string());
  return read_dense_mtx(p.string());
}

inline Vector as_vector(const Matrix& m, const std::string& key) {
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw IoError("descriptor: '" + key + "' must be a vector");
}

inline std::function<Matrix(double)> poly_identity(const Vector& coef, Index size) {
  return [coef, size](double mu) {
    double v = 0.0;
    for (Index k = coef.size() - 1; k >= 0; --k) v = v * mu + coef(k);
    return Matrix(v * Matrix::Identity(size, size));
  };
}

}  // namespace detail

inline SystemDescriptor parse_system_descriptor(std::istream& in, const std::filesystem::path& base,
                                                const std::string& name = "<descriptor>") {
  static const std::set<std::string> known = {"A", "B", "C", "E", "R", "x0", "hint", "B1", "B2",
                                              "C1", "C2", "nodes", "weights", "bpoly", "cpoly"};
  SystemDescriptor d;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!known.count(key)) throw IoError(name + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (d.entries.count(key)) throw IoError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    d.entries[key] = value;
  }
  auto has = [&](const char* k) { return d.entries.count(k) > 0; };
  auto mat = [&](const char* k) { return detail::load_matrix(d.entries.at(k), base); };
  if (!has("A")) throw IoError(name + ": key 'A' is required");

  Definiteness hint = Definiteness::unknown;
  if (has("hint")) {
    const std::string& h = d.entries.at("hint");
    if (h == "negative") hint = Definiteness::negative;
    else if (h == "positive") hint = Definiteness::positive;
    else if (h == "indefinite") hint = Definiteness::indefinite;
    else if (h != "unknown") throw IoError(name + ": bad hint '" + h + "'");
  }
  {
    const std::string& av = d.entries.at("A");
    if (auto inl = detail::parse_inline(av)) {
      d.sys.A = SparseSym::from_dense(*inl, hint);
    } else {
      const std::filesystem::path p = std::filesystem::path(av).is_absolute() ? std::filesystem::path(av) : base / av;
      d.sys.A = p.extension() == ".bin" ? SparseSym::from_dense(read_dense_blob(p.string()), hint)
                                        : read_sparse_sym(p.string(), hint);
    }
  }
  const Index n = d.sys.A.size();
  if (has("B")) d.sys.B = mat("B");
  else if (has("B1")) d.sys.B = mat("B1");
  else d.sys.B = Matrix::Zero(n, 1);
  if (has("C")) d.sys.C = mat("C");
  else if (has("C1")) d.sys.C = mat("C1");
  else d.sys.C = Matrix::Zero(1, n);
  if (d.sys.B.rows() != n && d.sys.B.cols() == n) d.sys.B.transposeInPlace();
  if (d.sys.C.cols() != n && d.sys.C.rows() == n) d.sys.C.transposeInPlace();
  if (has("E")) d.sys.E = detail::as_vector(mat("E"), "E");
  if (has("R")) d.sys.R = mat("R");
  if (has("x0")) d.sys.x0 = detail::as_vector(mat("x0"), "x0");
  d.sys.validate();

  if (has("nodes") || has("B1") || has("C1")) {
    ParametricIO pio;
    pio.B1 = has("B1") ? mat("B1") : d.sys.B;
    pio.C1 = has("C1") ? mat("C1") : d.sys.C;
    if (pio.C1.cols() != n && pio.C1.rows() == n) pio.C1.transposeInPlace();
    if (has("B2")) pio.B2 = mat("B2");
    if (has("C2")) {
      pio.C2 = mat("C2");
      if (pio.C2.cols() != n && pio.C2.rows() == n) pio.C2.transposeInPlace();
    }
    if (!has("nodes") || !has("weights")) throw IoError(name + ": parametric system needs nodes and weights");
    const Vector nodes = detail::as_vector(mat("nodes"), "nodes");
    const Vector weights = detail::as_vector(mat("weights"), "weights");
    pio.nodes.assign(nodes.data(), nodes.data() + nodes.size());
    pio.weights.assign(weights.data(), weights.data() + weights.size());
    if (has("bpoly")) pio.b = detail::poly_identity(detail::as_vector(mat("bpoly"), "bpoly"), pio.B1.cols());
    if (has("cpoly")) pio.c = detail::poly_identity(detail::as_vector(mat("cpoly"), "cpoly"), pio.C1.rows());
    d.param = std::move(pio);
  }
  return d;
}

inline SystemDescriptor read_system_descriptor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_system_descriptor(in, std::filesystem::path(path).parent_path(), path);
}

}  // namespace ratlanczos::io
