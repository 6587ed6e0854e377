#ifndef MOC_CSV_HPP
#define MOC_CSV_HPP

#include <charconv>
#include <cstdio>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moc/error.hpp"

namespace moc::csv {

// Splits one CSV record. Double quotes delimit fields that contain commas;
// a doubled quote inside a quoted field is a literal quote.
inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) {
        throw ParseError("unterminated quoted field");
    }
    fields.push_back(std::move(cur));
    return fields;
}

// Reads every non-empty record; strips a trailing '\r' and a UTF-8 BOM.
inline std::vector<std::vector<std::string>> read_all(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (first && line.rfind("\xEF\xBB\xBF", 0) == 0) {
            line.erase(0, 3);
        }
        first = false;
        if (line.empty()) {
            continue;
        }
        rows.push_back(split_line(line));
    }
    return rows;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out.push_back(',');
        }
        out += quote(fields[i]);
    }
    return out;
}

inline std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

// Shortest decimal literal that round-trips to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
    return std::string(buf, ptr);
}

} // namespace moc::csv

#endif
