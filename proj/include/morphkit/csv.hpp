#pragma once

// Minimal CSV helpers. Doubles are written in shortest round-trip form so files are
// byte-stable and reload bit-exactly.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "morphkit/errors.hpp"

namespace morphkit {

inline std::string fmt_double(double v) {
    if (v == 0.0) v = 0.0;  // collapse -0
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error("failed to format double");
    return std::string(buf, ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t row) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("row " + std::to_string(row) + ": cannot parse number '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s, std::size_t row) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("row " + std::to_string(row) + ": cannot parse integer '" + std::string(s) + "'");
    return v;
}

/// Header plus data rows; row numbers are 1-based file lines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv(std::istream& is, const std::vector<std::string>& expected_header) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            for (auto f : fields) t.header.emplace_back(f);
            if (t.header != expected_header) {
                std::string want;
                for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
                throw ValidationError("unexpected CSV header; expected " + want);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != expected_header.size())
            throw ValidationError("row " + std::to_string(lineno) + ": expected " +
                                  std::to_string(expected_header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        std::vector<std::string> row;
        for (auto f : fields) row.emplace_back(f);
        t.rows.push_back(std::move(row));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw ValidationError("CSV input is empty");
    return t;
}

/// "prefix1,prefix2,...,prefixN" column names.
inline std::vector<std::string> numbered(const std::string& prefix, int n) {
    std::vector<std::string> out;
    for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

inline std::string join(const std::vector<std::string>& cols) {
    std::string s;
    for (const auto& c : cols) s += (s.empty() ? "" : ",") + c;
    return s;
}

}  // namespace morphkit
