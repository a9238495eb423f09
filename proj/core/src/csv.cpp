#include "ramplab/csv.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "ramplab/common.hpp"

namespace ramplab {

std::string csv_number(double x) {
  if (x == 0.0) x = 0.0;  // never print the sign of a negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string csv_money(double x) {
  if (x == 0.0) x = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string csv_timestamp_line() {
  std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[64];
  std::strftime(buf, sizeof buf, "# generated %Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

void csv_table::add(const std::vector<std::string>& cells) {
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) row += ',';
    row += cells[i];
  }
  rows_.push_back(std::move(row));
}

void csv_table::write(std::ostream& os, bool with_timestamp) const {
  if (with_timestamp) os << csv_timestamp_line() << '\n';
  os << header_ << '\n';
  for (const std::string& row : rows_) os << row << '\n';
}

void csv_table::save(const std::string& dir, const std::string& name,
                     bool with_timestamp) const {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream os(path);
  if (!os) throw invalid_input("cannot open output file " + path);
  write(os, with_timestamp);
}

}  // namespace ramplab
