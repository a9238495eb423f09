// Deterministic CSV assembly: fixed-format numeric cells, an in-memory
// table with an optional generation-timestamp comment line, and file
// emission for the experiment reports.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ramplab {

// Fixed-width-independent numeric cell, "%.10g".  printf formatting is
// locale-free for the C locale and stable across runs, which the
// byte-identical rerun guarantee relies on.
std::string csv_number(double x);

// Monetary cell, "%.2f".
std::string csv_money(double x);

// "# generated <UTC timestamp>" comment line (without trailing newline).
std::string csv_timestamp_line();

// Header plus rows of pre-formatted cells.  Rows are stored joined; the
// writer only prepends the optional timestamp comment.
class csv_table {
public:
  explicit csv_table(std::string header) : header_(std::move(header)) {}

  void add(const std::vector<std::string>& cells);
  int num_rows() const { return static_cast<int>(rows_.size()); }

  void write(std::ostream& os, bool with_timestamp) const;
  // Writes to <dir>/<name>, creating the directory if needed.
  void save(const std::string& dir, const std::string& name, bool with_timestamp) const;

private:
  std::string header_;
  std::vector<std::string> rows_;
};

}  // namespace ramplab
