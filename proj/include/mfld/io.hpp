#ifndef MFLD_IO_HPP
#define MFLD_IO_HPP

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mfld/core.hpp"
#include "mfld/model.hpp"

namespace mfld::io {

/// 17 significant digits: round-trips every double.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = line.find(sep, start);
    std::string field(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(std::move(field));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

struct NumericTable {
  std::vector<std::string> header;  // empty when the file has none
  Matrix values;
};

/// Reads a rectangular CSV of decimal numbers. A first line that does not
/// parse as numbers is taken as the header. NaN and Inf are rejected.
inline NumericTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  NumericTable table;
  std::vector<double> flat;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    std::vector<double> vals(fields.size());
    bool numeric = true;
    for (std::size_t c = 0; c < fields.size(); ++c) numeric = numeric && parse_real(fields[c], vals[c]);
    if (!numeric) {
      require(rows == 0 && table.header.empty(), ErrorKind::io,
              path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
      table.header = std::move(fields);
      cols = table.header.size();
      continue;
    }
    if (cols == 0) cols = vals.size();
    require(vals.size() == cols, ErrorKind::io,
            path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) + " columns");
    require(all_finite(vals), ErrorKind::non_finite, path.string() + ":" + std::to_string(lineno) + ": NaN or Inf");
    flat.insert(flat.end(), vals.begin(), vals.end());
    ++rows;
  }
  table.values = Matrix(rows, cols);
  std::copy(flat.begin(), flat.end(), table.values.flat().begin());
  return table;
}

/// Dataset CSV: header x0,...,x{d_in-1},y then one row per example.
inline Dataset load_dataset_csv(const std::filesystem::path& path) {
  NumericTable t = read_numeric_csv(path);
  require(!t.header.empty(), ErrorKind::io, path.string() + ": missing header x0,...,y");
  const std::size_t cols = t.header.size();
  require(cols >= 1 && t.header.back() == "y", ErrorKind::io, path.string() + ": last column must be 'y'");
  for (std::size_t c = 0; c + 1 < cols; ++c)
    require(t.header[c] == "x" + std::to_string(c), ErrorKind::io,
            path.string() + ": expected column x" + std::to_string(c) + ", got '" + t.header[c] + "'");
  const std::size_t n = t.values.rows();
  Matrix x(n, cols - 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c + 1 < cols; ++c) x(i, c) = t.values(i, c);
    y[i] = t.values(i, cols - 1);
  }
  return Dataset(std::move(x), std::move(y));
}

/// Writes to `path` through a temporary file and a rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string matrix_csv(const std::vector<std::string>& header, const Matrix& m) {
  std::ostringstream os;
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  if (!header.empty()) os << "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << format_real(m(r, c));
    os << "\n";
  }
  return os.str();
}

inline std::vector<std::string> theta_header(std::size_t d) {
  std::vector<std::string> h(d);
  for (std::size_t j = 0; j < d; ++j) h[j] = "theta" + std::to_string(j);
  return h;
}

inline std::string dataset_csv(const Dataset& data) {
  std::vector<std::string> header;
  for (std::size_t c = 0; c < data.d_in(); ++c) header.push_back("x" + std::to_string(c));
  header.push_back("y");
  Matrix m(data.n(), data.d_in() + 1);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t c = 0; c < data.d_in(); ++c) m(i, c) = data.inputs(i, c);
    m(i, data.d_in()) = data.targets[i];
  }
  return matrix_csv(header, m);
}

}  // namespace mfld::io

#endif  // MFLD_IO_HPP
