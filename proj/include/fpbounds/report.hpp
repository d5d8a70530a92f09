#pragma once

// CSV and plain-text ledgers for BoundReport rows.

#include "fpbounds/bounds.hpp"

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace fpb {

inline constexpr const char* kCsvHeader = "check,name,lhs,rhs,margin,error,verdict";

/// %.17g, so every double round-trips.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace detail

inline void write_csv_row(const BoundReport& r, std::ostream& os) {
    os << detail::csv_field(r.check) << ',' << detail::csv_field(r.name) << ',' << format_double(r.lhs) << ','
       << format_double(r.rhs) << ',' << format_double(r.margin()) << ',' << format_double(r.error) << ','
       << to_string(r.verdict) << '\n';
}

inline void write_csv(const std::vector<BoundReport>& rows, std::ostream& os) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows) write_csv_row(r, os);
}

struct VerdictCounts {
    int holds = 0, violated = 0, inconclusive = 0;
};

inline VerdictCounts count_verdicts(const std::vector<BoundReport>& rows) {
    VerdictCounts c;
    for (const auto& r : rows) {
        switch (r.verdict) {
            case Verdict::holds: ++c.holds; break;
            case Verdict::violated: ++c.violated; break;
            default: ++c.inconclusive; break;
        }
    }
    return c;
}

/// Human-readable ledger: one block per row with its inputs and note.
inline void write_ledger(const std::vector<BoundReport>& rows, std::ostream& os) {
    for (const auto& r : rows) {
        os << r.check << " / " << r.name << ": " << to_string(r.verdict) << '\n';
        os << "  lhs    " << format_double(r.lhs) << '\n';
        os << "  rhs    " << format_double(r.rhs) << '\n';
        os << "  margin " << format_double(r.margin()) << '\n';
        os << "  error  " << format_double(r.error) << '\n';
        for (const auto& [k, v] : r.inputs) os << "  " << k << " = " << format_double(v) << '\n';
        if (!r.note.empty()) os << "  note: " << r.note << '\n';
    }
    const auto c = count_verdicts(rows);
    os << "summary: " << c.holds << " holds, " << c.violated << " violated, " << c.inconclusive
       << " inconclusive\n";
}

}  // namespace fpb
