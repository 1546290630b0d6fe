#include "anomex/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace anomex {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(trim(line.substr(start)));
      break;
    }
    cells.emplace_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  const std::string_view s = trim(text);
  auto fail = [&]() -> Timestamp {
    throw ParseError("invalid ISO 8601 timestamp '" + std::string(s) + "'");
  };
  auto digits = [&](std::size_t pos, std::size_t n, std::int64_t& out) {
    if (pos + n > s.size()) return false;
    const auto* first = s.data() + pos;
    const auto res = std::from_chars(first, first + n, out);
    return res.ec == std::errc() && res.ptr == first + n;
  };
  std::int64_t year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!digits(0, 4, year) || s.size() < 10 || s[4] != '-' || !digits(5, 2, month) || s[7] != '-' ||
      !digits(8, 2, day)) {
    return fail();
  }
  std::size_t pos = 10;
  std::int64_t millis = 0;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (!digits(pos + 1, 2, hour) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !digits(pos + 4, 2, minute)) {
      return fail();
    }
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!digits(pos + 1, 2, second)) return fail();
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t n = 0;
        std::int64_t scale = 100;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
          millis += (s[pos] - '0') * scale;
          scale /= 10;
          ++pos;
          ++n;
        }
        if (n == 0) return fail();
      }
    }
  }
  std::int64_t offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
      std::int64_t oh = 0, om = 0;
      if (!digits(pos + 1, 2, oh) || !digits(pos + 4, 2, om)) return fail();
      offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
      pos = s.size();
    } else {
      return fail();
    }
  }
  if (month < 1 || month > 12 || day < 1 ||
      day > days_in_month(year, static_cast<unsigned>(month)) || hour > 23 || minute > 59 ||
      second > 60) {
    return fail();
  }
  const std::int64_t days =
      days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t seconds = days * 86400 + hour * 3600 + minute * 60 + second - offset_minutes * 60;
  return Timestamp{std::string(s), seconds * 1000 + millis};
}

CsvTable read_csv_table(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);  // UTF-8 BOM
    }
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].empty()) throw ParseError("empty column name", line_no, c + 1);
        if (!seen.insert(cells[c]).second) {
          throw ParseError("duplicate column name '" + cells[c] + "'", line_no, c + 1);
        }
      }
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ParseError("missing header row");
  return table;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t column) {
  if (cell.empty()) throw ParseError("empty cell", row, column);
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  double value = 0;
  const auto res = std::from_chars(first, last, value, std::chars_format::general);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value)) {
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", row, column);
  }
  return value;
}

Dataset::Dataset(std::vector<std::string> names, RowMatrixXd values,
                 std::vector<Timestamp> timestamps, std::string provenance)
    : names_(std::move(names)),
      values_(std::move(values)),
      timestamps_(std::move(timestamps)),
      provenance_(std::move(provenance)) {
  if (names_.empty()) throw ShapeError("dataset needs at least one dimension");
  if (static_cast<Eigen::Index>(names_.size()) != values_.cols()) {
    throw ShapeError("dimension names do not match value width");
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InputError("dimension names must be non-empty");
    if (!seen.insert(n).second) throw InputError("duplicate dimension name '" + n + "'");
  }
  if (!timestamps_.empty() && static_cast<Eigen::Index>(timestamps_.size()) != values_.rows()) {
    throw ShapeError("timestamp count does not match row count");
  }
}

Dataset parse_telemetry(std::istream& in, const std::string& source) {
  CsvTable table = read_csv_table(in);
  const bool has_ts = !table.header.empty() && table.header.front() == "ts";
  const std::size_t offset = has_ts ? 1 : 0;
  if (table.header.size() <= offset) throw ParseError("no value columns in " + source, 1);
  std::vector<std::string> names(table.header.begin() + static_cast<std::ptrdiff_t>(offset),
                                 table.header.end());
  RowMatrixXd values(static_cast<Eigen::Index>(table.rows.size()),
                     static_cast<Eigen::Index>(names.size()));
  std::vector<Timestamp> stamps;
  if (has_ts) stamps.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    const std::size_t row_no = table.line_numbers[r];
    if (has_ts) {
      try {
        stamps.push_back(parse_timestamp(cells[0]));
      } catch (const ParseError& e) {
        throw ParseError(e.what(), row_no, 1);
      }
    }
    for (std::size_t c = offset; c < cells.size(); ++c) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - offset)) =
          parse_cell(cells[c], row_no, c + 1);
    }
  }
  return Dataset(std::move(names), std::move(values), std::move(stamps), source);
}

Dataset load_telemetry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_telemetry(in, path.string());
}

Dataset select_columns(const Dataset& data, const std::vector<std::string>& names) {
  RowMatrixXd values(data.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto it = std::find(data.names().begin(), data.names().end(), names[j]);
    if (it == data.names().end()) throw ShapeError("input has no column '" + names[j] + "'");
    values.col(static_cast<Eigen::Index>(j)) = data.values().col(it - data.names().begin());
  }
  return Dataset(names, std::move(values), data.timestamps(), data.provenance());
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_telemetry(std::ostream& out, const Dataset& data) {
  if (data.has_timestamps()) out << "ts,";
  for (std::size_t j = 0; j < data.names().size(); ++j) {
    out << (j ? "," : "") << data.names()[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (data.has_timestamps()) out << data.timestamps()[static_cast<std::size_t>(i)].text << ',';
    for (Eigen::Index j = 0; j < data.dims(); ++j) {
      out << (j ? "," : "") << format_number(data.values()(i, j));
    }
    out << '\n';
  }
}

Normalizer::Normalizer(Eigen::VectorXd min, Eigen::VectorXd max, std::vector<std::string> names)
    : min_(std::move(min)), max_(std::move(max)), names_(std::move(names)) {
  if (min_.size() != max_.size() || min_.size() == 0) {
    throw ShapeError("normalizer bounds must be non-empty and equal length");
  }
  if (!names_.empty() && static_cast<Eigen::Index>(names_.size()) != min_.size()) {
    throw ShapeError("normalizer names do not match its width");
  }
  if (!min_.allFinite() || !max_.allFinite()) throw InputError("normalizer bounds must be finite");
  for (Eigen::Index d = 0; d < min_.size(); ++d) {
    if (min_(d) > max_(d)) throw InputError("normalizer min exceeds max");
  }
}

std::vector<Eigen::Index> Normalizer::constant_dims() const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index d = 0; d < min_.size(); ++d) {
    if (min_(d) == max_(d)) out.push_back(d);
  }
  return out;
}

Eigen::VectorXd Normalizer::apply(const Eigen::Ref<const Eigen::VectorXd>& raw) const {
  if (raw.size() != dims()) {
    throw ShapeError("observation has width " + std::to_string(raw.size()) + ", normalizer expects " +
                     std::to_string(dims()));
  }
  if (!raw.allFinite()) throw InputError("observation contains non-finite values");
  Eigen::VectorXd out(dims());
  for (Eigen::Index d = 0; d < dims(); ++d) {
    const double span = max_(d) - min_(d);
    out(d) = span > 0 ? std::clamp((raw(d) - min_(d)) / span, 0.0, 1.0) : 0.5;
  }
  return out;
}

RowMatrixXd Normalizer::apply_rows(const RowMatrixXd& raw) const {
  RowMatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    out.row(i) = apply(raw.row(i).transpose()).transpose();
  }
  return out;
}

Eigen::VectorXd Normalizer::invert(const Eigen::Ref<const Eigen::VectorXd>& normalized) const {
  if (normalized.size() != dims()) throw ShapeError("normalized vector has the wrong width");
  return (min_.array() + normalized.array() * (max_ - min_).array()).matrix();
}

Normalizer fit_normalizer(const Dataset& data) {
  if (data.rows() == 0) throw InputError("cannot fit a normalizer on an empty dataset");
  return Normalizer(data.values().colwise().minCoeff().transpose(),
                    data.values().colwise().maxCoeff().transpose(), data.names());
}

Dataset normalize(const Normalizer& norm, const Dataset& data) {
  return Dataset(data.names(), norm.apply_rows(data.values()), data.timestamps(),
                 data.provenance());
}

nlohmann::json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ParseError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw ParseError("expected a numeric array");
    v(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  }
  return v;
}

nlohmann::json normalizer_to_json(const Normalizer& norm) {
  return {{"min", vector_to_json(norm.min())},
          {"max", vector_to_json(norm.max())},
          {"names", norm.names()}};
}

Normalizer normalizer_from_json(const nlohmann::json& doc) {
  try {
    return Normalizer(vector_from_json(doc.at("min")), vector_from_json(doc.at("max")),
                      doc.value("names", std::vector<std::string>{}));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed normalizer document: ") + e.what());
  }
}

}  // namespace anomex
