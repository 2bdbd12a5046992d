#include "mfpinn/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mfpinn/errors.hpp"

namespace mfpinn::csv {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IoError("double formatting failed");
  return std::string(buf, ptr);
}

void write(const std::string& path, const Table& table) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto& c : table.comments) os << c << '\n';
  os << table.header << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
  if (!os) throw IoError("short write: " + path);
}

Table read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (!line.empty() && line.front() == '#') {
        t.comments.push_back(line);
        continue;
      }
      t.header = line;
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw IoError("csv without header row: " + path);
  return t;
}

double parse_double(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw IoError("bad numeric cell: '" + cell + "'");
  return v;
}

}  // namespace mfpinn::csv
