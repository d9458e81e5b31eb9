#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"

namespace pbrl {

/// Shortest round-trip text for a double; "nan" and "inf" spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Comma-separated rows with a fixed header. Cells are strings so callers
/// control integer vs floating formatting.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), width_(header.size()) {
    write(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw UsageError("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                                                 std::to_string(width_));
    write(cells);
  }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
    os_.flush();
  }

  std::ostream& os_;
  std::size_t width_;
};

}  // namespace pbrl
