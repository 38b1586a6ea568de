#pragma once

// Minimal CSV reading/writing with RFC-style quoting, fixed float formatting
// for reproducible output bytes, and atomic file writes (temp + rename).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "upd/raster.hpp"

namespace upd::csv {

// Enough digits to round-trip the values we emit, fixed across platforms.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += quote_field(fields[i]);
    }
    line += '\n';
    return line;
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::vector<std::vector<std::string>> read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open CSV file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        rows.push_back(split_row(line));
    }
    return rows;
}

// A killed run never leaves a truncated file: content lands under a temp name
// and is renamed into place.
inline void atomic_write(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot create output file: " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("failed writing output file: " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

class Writer {
public:
    explicit Writer(std::vector<std::string> header) { buffer_ += join_row(header); }

    void add_row(const std::vector<std::string>& fields) { buffer_ += join_row(fields); }

    const std::string& content() const { return buffer_; }

    void write(const std::string& path) const { atomic_write(path, buffer_); }

private:
    std::string buffer_;
};

}  // namespace upd::csv
