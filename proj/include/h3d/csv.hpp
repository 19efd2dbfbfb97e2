#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace h3d {

/// RFC-4180-style writer: optional '#' config comment, one header row, then
/// data rows. Streams to stdout when the path is empty.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open output file: " + path);
    }
  }

  void comment(const std::string& text) { out() << "# " << text << "\n"; }

  void header(const std::vector<std::string>& names) { write_row(names); }

  void row(const std::vector<std::string>& fields) { write_row(fields); }

  static std::string num(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
  }
  static std::string num(std::int64_t v) { return std::to_string(v); }
  static std::string num(std::uint64_t v) { return std::to_string(v); }
  static std::string num(int v) { return std::to_string(v); }

 private:
  std::ostream& out() { return file_.is_open() ? file_ : std::cout; }

  void write_row(const std::vector<std::string>& fields) {
    auto& o = out();
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) o << ",";
      o << fields[i];
    }
    o << "\n";
  }

  std::ofstream file_;
};

}  // namespace h3d
