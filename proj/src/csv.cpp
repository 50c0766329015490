#include "garchrank/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace garchrank {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

CsvSeries ingest_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split_csv_line(line, options.delimiter);

  std::size_t col = options.column_index;
  if (!options.column.empty()) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](const std::string& h) { return trim(h) == options.column; });
    if (it == header.end()) {
      throw std::runtime_error(path + ": no column named '" + options.column + "'");
    }
    col = static_cast<std::size_t>(it - header.begin());
  } else if (col >= header.size()) {
    throw std::runtime_error(path + ": column index " + std::to_string(col) + " out of range");
  }

  CsvSeries out;
  out.column = trim(header[col]);
  std::size_t unparseable = 0;
  std::vector<double> raw;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++out.rows_read;
    const auto cells = split_csv_line(line, options.delimiter);
    const std::string cell = col < cells.size() ? trim(cells[col]) : std::string();
    const auto v = parse_number(cell);
    if (!v) {
      ++out.rows_dropped;
      const bool missing = cell.empty() || cell == "NaN" || cell == "nan" || cell == "NA";
      if (!missing) ++unparseable;
      continue;
    }
    raw.push_back(*v);
  }
  if (out.rows_read > 0 &&
      static_cast<double>(unparseable) >
          options.max_bad_fraction * static_cast<double>(out.rows_read)) {
    throw std::runtime_error(path + ": " + std::to_string(unparseable) + " of " +
                             std::to_string(out.rows_read) + " rows are not numeric");
  }

  if (options.prices) {
    for (std::size_t t = 1; t < raw.size(); ++t) {
      if (!(raw[t - 1] > 0.0 && raw[t] > 0.0)) {
        throw std::runtime_error(path + ": prices must be positive");
      }
      const double ratio = raw[t] / raw[t - 1];
      out.values.push_back(options.log_returns ? std::log(ratio) : ratio - 1.0);
    }
  } else {
    out.values = std::move(raw);
  }
  if (options.tail > 0 && out.values.size() > options.tail) {
    out.values.erase(out.values.begin(),
                     out.values.end() - static_cast<std::ptrdiff_t>(options.tail));
  }
  if (out.values.empty()) throw std::runtime_error(path + ": no usable values");
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) {
    throw std::invalid_argument("write_csv: one name per column required");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t c = 0; c < names.size(); ++c) {
    out << (c ? "," : "") << quote_if_needed(names[c]);
  }
  out << '\n';
  std::size_t rows = 0;
  for (const auto& col : columns) rows = std::max(rows, col.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      if (r < columns[c].size()) out << format_double(columns[c][r]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace garchrank
