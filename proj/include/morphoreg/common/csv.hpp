#pragma once

// Minimal comma-separated reader/writer for the flat, unquoted tables this project emits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoreg::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] auto column(const std::string& name) const -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw std::invalid_argument("missing CSV column '" + name + "'");
    }
};

inline auto split(const std::string& line) -> std::vector<std::string> {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

inline auto read(const std::filesystem::path& path) -> Table {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    Table t;
    std::string line;
    if (!std::getline(is, line)) {
        throw std::runtime_error("'" + path.string() + "' is empty");
    }
    t.header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        auto row = split(line);
        if (row.size() != t.header.size()) {
            throw std::runtime_error("'" + path.string() + "': row has " + std::to_string(row.size()) +
                                     " fields, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// Shortest round-trippable decimal for a double.
inline auto format_double(double v) -> std::string {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline auto format_fixed(double v, int decimals) -> std::string {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace morphoreg::csv
