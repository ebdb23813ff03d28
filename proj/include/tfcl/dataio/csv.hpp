#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "tfcl/core/error.hpp"
#include "tfcl/dataio/recording.hpp"

namespace tfcl::dataio {

inline constexpr std::string_view kCsvHeader = "subject,label,x,y,z";

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

inline double parse_real(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value))
        fail(ErrorCode::MalformedRow,
             "line " + std::to_string(line_no) + ": '" + std::string(field) + "' is not a finite number");
    return value;
}

}  // namespace detail

/// Parses the `subject,label,x,y,z` format. Consecutive rows with the same
/// (subject, label) pair form one recording.
inline RecordingSet parse_csv(std::istream& in, double sample_rate_hz) {
    require(sample_rate_hz > 0.0, ErrorCode::InvalidParams, "expected sample rate must be positive");
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        require(detail::trim(line) == kCsvHeader, ErrorCode::MalformedRow,
                "line " + std::to_string(line_no) + ": expected header '" + std::string(kCsvHeader) + "'");
        have_header = true;
        break;
    }
    require(have_header, ErrorCode::EmptyFile, "no header row");

    RecordingSet rs;
    rs.sample_rate_hz = sample_rate_hz;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_fields(line);
        require(fields.size() == 5, ErrorCode::MalformedRow,
                "line " + std::to_string(line_no) + ": expected 5 columns, found " + std::to_string(fields.size()));
        require(!fields[0].empty() && !fields[1].empty(), ErrorCode::MalformedRow,
                "line " + std::to_string(line_no) + ": empty subject or label");
        Sample3 s{detail::parse_real(fields[2], line_no), detail::parse_real(fields[3], line_no),
                  detail::parse_real(fields[4], line_no)};
        if (rs.recordings.empty() || rs.recordings.back().subject != fields[0] ||
            rs.recordings.back().label != fields[1]) {
            rs.recordings.push_back({std::string(fields[0]), std::string(fields[1]), {}});
        }
        rs.recordings.back().samples.push_back(s);
    }
    require(!rs.recordings.empty(), ErrorCode::EmptyFile, "file has a header but no samples");
    return rs;
}

inline RecordingSet load_csv(const std::string& path, double expected_rate_hz) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open '" + path + "'");
    return parse_csv(in, expected_rate_hz);
}

inline void write_csv(const RecordingSet& rs, std::ostream& out) {
    out << kCsvHeader << '\n';
    char buf[128];
    for (const auto& r : rs.recordings) {
        for (const auto& s : r.samples) {
            // 17 significant digits round-trip doubles exactly
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", s[0], s[1], s[2]);
            out << r.subject << ',' << r.label << ',' << buf << '\n';
        }
    }
}

inline void save_csv(const RecordingSet& rs, const std::string& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + path + "'");
    write_csv(rs, out);
    require(static_cast<bool>(out), ErrorCode::IoError, "write to '" + path + "' failed");
}

}  // namespace tfcl::dataio
