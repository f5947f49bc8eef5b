#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace ratlanczos::cli {

inline constexpr int kCsvSchemaVersion = 1;

/// RFC-4180 CSV with a versioned schema comment line; numbers in %.16e.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& kind, std::vector<std::string> columns)
      : path_(path), out_(path, std::ios::binary), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << "# ratlanczos-csv v" << kCsvSchemaVersion << " " << kind << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  CsvWriter& cell(const std::string& s) {
    sep();
    const bool quote = s.find_first_of(",\"\n") != std::string::npos;
    if (!quote) {
      out_ << s;
    } else {
      out_ << '"';
      for (char c : s) out_ << (c == '"' ? "\"\"" : std::string(1, c));
      out_ << '"';
    }
    return *this;
  }
  CsvWriter& cell(const char* s) { return cell(std::string(s)); }
  CsvWriter& cell(double v) {
    sep();
    out_ << number(v);
    return *this;
  }
  CsvWriter& cell(long long v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& cell(long v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }

  void end_row() {
    if (col_ != ncols_) throw std::logic_error("CsvWriter: row has wrong number of cells");
    out_ << "\n";
    out_.flush();
    col_ = 0;
  }

  const std::filesystem::path& path() const { return path_; }

  static std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
  }

 private:
  void sep() {
    if (col_++ > 0) out_ << ",";
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t ncols_;
  std::size_t col_ = 0;
};

/// JSON-safe double: non-finite values become null.
inline nlohmann::json jnum(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace ratlanczos::cli
