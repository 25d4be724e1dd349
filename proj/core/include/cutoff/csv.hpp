#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cutoff/errors.hpp"

namespace cutoff {

/// Minimal CSV writer with fixed "%.12g" formatting so equal doubles
/// always serialize to equal bytes.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw ConfigError("CsvWriter: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  CsvWriter& field(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    sep();
    out_ << buf;
    return *this;
  }

  CsvWriter& field(int v) {
    sep();
    out_ << v;
    return *this;
  }

  CsvWriter& field(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ofstream out_;
  bool first_ = true;
};

}  // namespace cutoff
