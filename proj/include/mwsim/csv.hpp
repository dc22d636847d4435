#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mwsim/errors.hpp"

namespace mwsim {

/// In-memory CSV table with a header row. Values are kept as strings;
/// numeric access parses on demand.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw DataError("csv: missing column '" + name + "'");
    }
    bool has_col(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
    double num(size_t row, int c) const {
        const std::string& s = rows[row][c];
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw DataError("csv: not a number '" + s + "' at row " +
                            std::to_string(row + 2));
        }
    }
    const std::string& str(size_t row, int c) const { return rows[row][c]; }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

/// Reads a CSV file; lines starting with '#' (metadata headers) are skipped.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open csv file: " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (!have_header) {
            t.header = cells;
            have_header = true;
        } else {
            if (cells.size() != t.header.size())
                throw DataError("csv: ragged row in " + path);
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw DataError("csv: empty file " + path);
    return t;
}

/// Fixed shortest-roundtrip formatting so emitted files are byte-stable.
inline std::string fmt_double(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw DataError("cannot open for writing: " + path);
    }
    void comment(const std::string& text) { out_ << "# " << text << "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

}  // namespace mwsim
