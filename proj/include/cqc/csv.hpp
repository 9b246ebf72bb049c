#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

namespace cqc {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// 12 significant digits, dot decimal, no locale.
inline std::string csv_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Quotes a field if it holds a comma, quote or line break.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

/// Comment block that opens every emitted table.
inline void write_csv_preamble(std::ostream& os, std::string_view command, std::string_view config_json,
                               std::uint64_t seed) {
    os << "# tool: cqc " << kToolVersion << '\n'
       << "# command: " << command << '\n'
       << "# config: " << config_json << '\n'
       << "# seed: " << seed << '\n';
}

}  // namespace cqc
