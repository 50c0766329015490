#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace garchrank {

struct CsvOptions {
  // Column header name; when empty, column_index is used.
  std::string column;
  std::size_t column_index = 0;
  // The column holds prices; convert to returns.
  bool prices = false;
  // With prices: log(P_t / P_t-1) when true, P_t / P_t-1 - 1 otherwise.
  bool log_returns = true;
  // Keep only the last `tail` values (after conversion); 0 keeps all.
  std::size_t tail = 0;
  // Fraction of data rows allowed to be non-numeric before failing.
  double max_bad_fraction = 0.05;
  char delimiter = ',';
};

struct CsvSeries {
  std::vector<double> values;
  std::string column;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;  // blank, NaN or unparseable
};

// Splits one record with RFC 4180 quoting ("" escapes a quote).
std::vector<std::string> split_csv_line(const std::string& line, char delimiter = ',');

CsvSeries ingest_csv(const std::string& path, const CsvOptions& options = {});

// One column per series, header from names, %.17g so doubles round-trip.
// Shorter series leave trailing cells blank.
void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<std::vector<double>>& columns);

}  // namespace garchrank
