#pragma once

// Bin counts as CSV with columns phase_setting, detector, bin, counts.
// phase_setting is "0" or "pi/2" (a numeric value in radians is accepted);
// bin is one of e, l, ll. Blank lines and lines starting with '#' are skipped.

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlbsm/errors.hpp"
#include "nlbsm/io/format.hpp"
#include "nlbsm/qubits.hpp"
#include "nlbsm/tomography.hpp"

namespace nlbsm::io {

class CsvError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    return out;
}

inline int parse_phase(const std::string& s) {
    if (s == "0") return 0;
    if (s == "pi/2") return 1;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == s.size() && pos > 0) {
        if (std::abs(v) < 1e-6) return 0;
        if (std::abs(v - 0.5 * kPi) < 1e-6) return 1;
    }
    return -1;
}

} // namespace detail

inline tomo::RawBinCounts read_counts_csv(std::istream& in, const std::string& source = "<counts>") {
    tomo::RawBinCounts raw;
    std::string line;
    int lineno = 0;
    bool header = false;
    std::array<std::array<std::array<bool, 3>, 2>, 2> seen{};
    auto fail = [&](const std::string& msg) -> void {
        throw CsvError(source + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto cells = detail::split(t);
        if (!header) {
            if (cells != std::vector<std::string>{"phase_setting", "detector", "bin", "counts"}) {
                fail("expected header phase_setting,detector,bin,counts");
            }
            header = true;
            continue;
        }
        if (cells.size() != 4) fail("expected 4 columns");
        const int phase = detail::parse_phase(cells[0]);
        if (phase < 0) fail("phase_setting must be 0 or pi/2");
        if (cells[1] != "1" && cells[1] != "2") fail("detector must be 1 or 2");
        const int det = cells[1] == "1" ? 1 : 2;
        tomo::Bin bin{};
        if (cells[2] == "e") {
            bin = tomo::Bin::Early;
        } else if (cells[2] == "l") {
            bin = tomo::Bin::Late;
        } else if (cells[2] == "ll") {
            bin = tomo::Bin::LateLate;
        } else {
            fail("bin must be e, l or ll");
        }
        double value = 0.0;
        std::size_t pos = 0;
        try {
            value = std::stod(cells[3], &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != cells[3].size() || !(value >= 0.0) || !std::isfinite(value)) fail("counts must be a non-negative number");
        auto& flag = seen[static_cast<std::size_t>(phase)][static_cast<std::size_t>(det - 1)][static_cast<std::size_t>(bin)];
        if (flag) fail("duplicate entry");
        flag = true;
        raw.at(phase, det, bin) = value;
    }
    if (!header) throw CsvError(source + ": empty counts file");
    return raw;
}

inline void write_counts_csv(std::ostream& os, const tomo::RawBinCounts& raw) {
    static const char* bins[] = {"e", "l", "ll"};
    os << "phase_setting,detector,bin,counts\n";
    for (int phase = 0; phase < 2; ++phase)
        for (int det = 1; det <= 2; ++det)
            for (int b = 0; b < 3; ++b)
                os << (phase == 0 ? "0" : "pi/2") << ',' << det << ',' << bins[b] << ','
                   << format_double(raw.at(phase, det, static_cast<tomo::Bin>(b))) << '\n';
}

} // namespace nlbsm::io
