#include "pmest/matrix_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace pmest {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'X', '1'};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// nullopt when the field is not a number at all.
std::optional<double> parse_number(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError(std::string("binary matrix: truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

MatrixFormat format_for_path(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0 ? MatrixFormat::bin : MatrixFormat::csv;
}

SampleMatrix read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long row = 0;
  std::size_t d = 0;
  bool seen_first = false;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_fields(t);
    std::vector<double> values;
    values.reserve(fields.size());
    bool numeric = true;
    for (const auto f : fields) {
      auto v = parse_number(f);
      if (!v) {
        numeric = false;
        break;
      }
      values.push_back(*v);
    }
    if (!seen_first) {
      seen_first = true;
      d = fields.size();
      if (!numeric) continue;  // header row
    }
    if (fields.size() != d)
      throw ParseError("csv: expected " + std::to_string(d) + " fields, found " + std::to_string(fields.size()), row);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      auto v = parse_number(fields[c]);
      if (!v) throw ParseError("csv: not a number '" + std::string(fields[c]) + "'", row, static_cast<long>(c + 1));
      if (!std::isfinite(*v)) throw NonFiniteValue("csv: non-finite value", row, static_cast<long>(c + 1));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("csv: no data rows");
  Eigen::MatrixXd m(static_cast<Index>(d), static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < d; ++i) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
  return SampleMatrix(std::move(m));
}

SampleMatrix read_bin(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError("binary matrix: bad magic");
  const std::uint32_t d = get_u32(in, "dimension");
  const std::uint32_t n = get_u32(in, "sample count");
  if (d == 0 || n == 0) throw ParseError("binary matrix: empty matrix");
  Eigen::MatrixXd m(static_cast<Index>(d), static_cast<Index>(n));
  unsigned char b[8];
  for (Index k = 0; k < m.size(); ++k) {
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("binary matrix: truncated data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    const double v = std::bit_cast<double>(bits);
    const long row = static_cast<long>(k / d) + 1;
    const long col = static_cast<long>(k % d) + 1;
    if (!std::isfinite(v)) throw NonFiniteValue("binary matrix: non-finite value", row, col);
    m.data()[k] = v;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("binary matrix: trailing bytes");
  return SampleMatrix(std::move(m));
}

SampleMatrix load_matrix(const std::string& path, std::optional<MatrixFormat> format) {
  const MatrixFormat f = format.value_or(format_for_path(path));
  std::ifstream in(path, f == MatrixFormat::bin ? std::ios::binary : std::ios::in);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return f == MatrixFormat::bin ? read_bin(in) : read_csv(in);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  std::string line;
  for (Index j = 0; j < m.cols(); ++j) {
    line.clear();
    for (Index i = 0; i < m.rows(); ++i) {
      if (i) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
}

void write_bin(std::ostream& out, const Eigen::MatrixXd& m) {
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  unsigned char b[8];
  for (Index k = 0; k < m.size(); ++k) {
    const auto bits = std::bit_cast<std::uint64_t>(m.data()[k]);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& m, std::optional<MatrixFormat> format) {
  const MatrixFormat f = format.value_or(format_for_path(path));
  std::ofstream out(path, f == MatrixFormat::bin ? std::ios::binary : std::ios::out);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  if (f == MatrixFormat::bin)
    write_bin(out, m);
  else
    write_csv(out, m);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace pmest
