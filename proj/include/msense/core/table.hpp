// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "msense/core/errors.hpp"

namespace msense::io {

/// Tab-delimited text table with `# key: value` provenance header lines.
/// Numeric formatting is fixed ("%.12g") so identical data produces
/// identical bytes.
class TableWriter {
  public:
    explicit TableWriter(const std::string& path) : out_(path) {
        if (!out_) throw ValidationError("cannot open for writing: " + path);
    }

    void comment(const std::string& key, const std::string& value) {
        out_ << "# " << key << ": " << value << "\n";
    }

    void columns(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            out_ << (i ? "\t" : "") << names[i];
        }
        out_ << "\n";
    }

    void cell(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        out_ << (col_++ ? "\t" : "") << buf;
    }

    void cell(const std::string& v) { out_ << (col_++ ? "\t" : "") << v; }
    void cell(long long v) { out_ << (col_++ ? "\t" : "") << v; }
    void cell(int v) { cell(static_cast<long long>(v)); }

    void end_row() {
        out_ << "\n";
        col_ = 0;
    }

    void close() { out_.close(); }

  private:
    std::ofstream out_;
    int col_ = 0;
};

inline std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace msense::io
