#pragma once

// Column-oriented numeric tables written as CSV or as a JSON array of rows.

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "nlbsm/errors.hpp"
#include "nlbsm/io/format.hpp"
#include <nlohmann/json.hpp>

namespace nlbsm::io {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> row) {
        if (row.size() != columns.size()) throw InvalidParameter("row width does not match the table header");
        rows.push_back(std::move(row));
    }
};

inline void write_csv(std::ostream& os, const Table& t) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
        os << '\n';
    }
}

inline nlohmann::ordered_json to_json(const Table& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json r = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < row.size(); ++c) r[t.columns[c]] = row[c];
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_json(std::ostream& os, const nlohmann::ordered_json& j) { os << j.dump(2) << '\n'; }

} // namespace nlbsm::io
