#pragma once

#include <string>
#include <vector>

namespace mfpinn::csv {

// Shortest decimal that round-trips the double exactly.
std::string fmt(double v);

// CSV with optional leading '#' comment lines. Cells are kept as raw
// strings so read-then-write reproduces a file byte for byte.
struct Table {
  std::vector<std::string> comments;  // full lines, each starting with '#'
  std::string header;
  std::vector<std::vector<std::string>> rows;
};

void write(const std::string& path, const Table& table);
Table read(const std::string& path);

double parse_double(const std::string& cell);

}  // namespace mfpinn::csv
