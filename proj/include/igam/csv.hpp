#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "igam/error.hpp"

namespace igam::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::ptrdiff_t column(std::string_view name) const {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) return static_cast<std::ptrdiff_t>(j);
        }
        return -1;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace detail

// Comma-separated, double-quote escaping, optional UTF-8 BOM, LF or CRLF.
// Blank lines are skipped. Every data row must have as many cells as the header.
inline Table parse(std::string_view text) {
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
        text.remove_prefix(3);
    }

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool in_quotes = false;
    bool cell_was_quoted = false;
    bool record_has_content = false;

    auto end_cell = [&] {
        record.push_back(cell_was_quoted ? cell : std::string(detail::trim(cell)));
        cell.clear();
        cell_was_quoted = false;
    };
    auto end_record = [&] {
        end_cell();
        if (record_has_content) records.push_back(std::move(record));
        record.clear();
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            cell_was_quoted = true;
            cell.clear();
            record_has_content = true;
            break;
        case ',':
            end_cell();
            record_has_content = true;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            break;
        default:
            cell.push_back(c);
            if (c != ' ' && c != '\t') record_has_content = true;
        }
    }
    if (in_quotes) throw IngestionError("csv: unterminated quoted field");
    end_record();

    Table table;
    if (records.empty()) return table;
    table.header = std::move(records.front());
    table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.header.size()) {
            throw IngestionError("csv: row " + std::to_string(r + 1) + " has " +
                                 std::to_string(table.rows[r].size()) + " cells, header has " +
                                 std::to_string(table.header.size()));
        }
    }
    return table;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigurationError("dataset not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Parses a finite real; returns false on anything else.
inline bool parse_real(std::string_view s, double& out) {
    s = detail::trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace igam::csv
