#pragma once

// TOML run configuration: typed field access with line-numbered
// diagnostics, unit handling for transmissions, unknown-key detection and a
// canonical serialization used for the run digest.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlbsm/errors.hpp"
#include "nlbsm/io/format.hpp"
#include "toml.hpp"

namespace nlbsm::cli {

class ConfigError : public Error {
public:
    using Error::Error;
};

class Config {
public:
    static Config parse_string(std::string_view text, std::string source = "<config>") {
        Config c;
        c.source_ = std::move(source);
        try {
            c.table_ = toml::parse(text, c.source_);
        } catch (const toml::parse_error& e) {
            throw ConfigError(c.source_ + ":" + std::to_string(e.source().begin.line) + ": " +
                              std::string(e.description()));
        }
        return c;
    }

    static Config parse_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError(path.string() + ": cannot open config file");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path.string());
    }

    const toml::table& table() const noexcept { return table_; }
    const std::string& source() const noexcept { return source_; }

    bool has(std::string_view path) const { return find(path) != nullptr; }

    double number(std::string_view path, std::optional<double> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        if (auto v = n->value_exact<double>()) return *v;
        if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
        fail(path, n, "expected a number");
    }

    double number_in(std::string_view path, double lo, double hi, std::optional<double> fallback = std::nullopt) const {
        const double v = number(path, fallback);
        if (!(v >= lo && v <= hi)) {
            fail(path, find(path), "value " + io::format_double(v) + " outside [" + io::format_double(lo) + ", " +
                                       io::format_double(hi) + "]");
        }
        return v;
    }

    // A linear transmission in [0, 1], given as a number, as "<x> linear" or
    // as a loss "<x> dB" (t = 10^(-x/10)).
    double transmission(std::string_view path, std::optional<double> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        double t = 0.0;
        if (auto s = n->value_exact<std::string>()) {
            std::istringstream in(*s);
            double x = 0.0;
            std::string unit;
            std::string rest;
            if (!(in >> x) || !(in >> unit) || (in >> rest)) fail(path, n, "expected \"<number> dB\" or \"<number> linear\"");
            if (unit == "dB") {
                if (!(x >= 0.0)) fail(path, n, "loss in dB must be non-negative");
                t = std::pow(10.0, -x / 10.0);
            } else if (unit == "linear") {
                t = x;
            } else {
                fail(path, n, "unknown unit '" + unit + "' (use dB or linear)");
            }
        } else {
            t = number(path);
        }
        if (!(t >= 0.0 && t <= 1.0)) fail(path, n, "transmission must lie in [0, 1]");
        return t;
    }

    std::int64_t integer(std::string_view path, std::optional<std::int64_t> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        if (auto v = n->value_exact<std::int64_t>()) return *v;
        fail(path, n, "expected an integer");
    }

    bool boolean(std::string_view path, std::optional<bool> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        if (auto v = n->value_exact<bool>()) return *v;
        fail(path, n, "expected true or false");
    }

    std::string string(std::string_view path, std::optional<std::string> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        if (auto v = n->value_exact<std::string>()) return *v;
        fail(path, n, "expected a string");
    }

    std::string choice(std::string_view path, std::initializer_list<std::string_view> allowed,
                       std::optional<std::string> fallback = std::nullopt) const {
        const std::string v = string(path, std::move(fallback));
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
            fail(path, find(path), "'" + v + "' is not one of: " + list);
        }
        return v;
    }

    std::vector<double> numbers(std::string_view path, std::optional<std::vector<double>> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        const toml::array* arr = n->as_array();
        if (!arr) fail(path, n, "expected an array of numbers");
        std::vector<double> out;
        for (const toml::node& e : *arr) {
            if (auto v = e.value_exact<double>()) {
                out.push_back(*v);
            } else if (auto i = e.value_exact<std::int64_t>()) {
                out.push_back(static_cast<double>(*i));
            } else {
                fail(path, &e, "expected an array of numbers");
            }
        }
        return out;
    }

    std::vector<std::string> strings(std::string_view path,
                                     std::optional<std::vector<std::string>> fallback = std::nullopt) const {
        const toml::node* n = lookup(path, fallback.has_value());
        if (!n) return *fallback;
        const toml::array* arr = n->as_array();
        if (!arr) fail(path, n, "expected an array of strings");
        std::vector<std::string> out;
        for (const toml::node& e : *arr) {
            auto v = e.value_exact<std::string>();
            if (!v) fail(path, &e, "expected an array of strings");
            out.push_back(*v);
        }
        return out;
    }

    // Rejects keys nobody read inside tables from which something was read.
    void check_unknown() const { check_table(table_, ""); }

    std::string canonical() const {
        std::string out;
        emit_table(out, table_, "");
        return out;
    }

private:
    toml::table table_;
    std::string source_;
    mutable std::set<std::string, std::less<>> used_;

    const toml::node* find(std::string_view path) const {
        const toml::node* cur = &table_;
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            const std::string_view key = path.substr(start, dot == std::string_view::npos ? path.size() - start : dot - start);
            const toml::table* t = cur->as_table();
            if (!t) return nullptr;
            cur = t->get(key);
            if (!cur) return nullptr;
            if (dot == std::string_view::npos) return cur;
            start = dot + 1;
        }
    }

    const toml::node* lookup(std::string_view path, bool optional) const {
        used_.insert(std::string(path));
        const toml::node* n = find(path);
        if (!n && !optional) throw ConfigError(source_ + ": missing required field '" + std::string(path) + "'");
        return n;
    }

    [[noreturn]] void fail(std::string_view path, const toml::node* n, const std::string& msg) const {
        std::string where = source_;
        if (n && n->source().begin.line > 0) where += ":" + std::to_string(n->source().begin.line);
        throw ConfigError(where + ": field '" + std::string(path) + "': " + msg);
    }

    void check_table(const toml::table& t, const std::string& prefix) const {
        bool touched = false;
        for (const auto& [k, v] : t) {
            if (!v.is_table() && used_.count(prefix + std::string(k.str()))) touched = true;
        }
        for (const auto& [k, v] : t) {
            const std::string path = prefix + std::string(k.str());
            if (const toml::table* sub = v.as_table()) {
                check_table(*sub, path + ".");
            } else if (touched && !used_.count(path)) {
                fail(path, &v, "unknown field");
            }
        }
    }

    static std::string key_text(std::string_view k) {
        const bool bare = !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        });
        return bare ? std::string(k) : quote(k);
    }

    static std::string quote(std::string_view s) {
        std::string out = "\"";
        for (char c : s) {
            switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
                    out += buf;
                } else {
                    out += c;
                }
            }
        }
        return out + "\"";
    }

    static void emit_value(std::string& out, const toml::node& n) {
        if (auto v = n.value_exact<std::int64_t>()) {
            out += std::to_string(*v);
        } else if (auto d = n.value_exact<double>()) {
            std::string s = io::format_double(*d);
            if (s.find_first_of(".eni") == std::string::npos) s += ".0";
            out += s;
        } else if (auto b = n.value_exact<bool>()) {
            out += *b ? "true" : "false";
        } else if (auto s = n.value_exact<std::string>()) {
            out += quote(*s);
        } else if (const toml::array* a = n.as_array()) {
            out += "[";
            bool first = true;
            for (const toml::node& e : *a) {
                out += first ? "" : ", ";
                first = false;
                emit_value(out, e);
            }
            out += "]";
        } else if (const toml::table* t = n.as_table()) {
            out += "{";
            bool first = true;
            for (const auto& k : sorted_keys(*t)) {
                out += first ? "" : ", ";
                first = false;
                out += key_text(k) + " = ";
                emit_value(out, *t->get(k));
            }
            out += "}";
        } else {
            std::ostringstream os;
            n.visit([&](const auto& x) { os << x; });
            out += os.str();
        }
    }

    static std::vector<std::string> sorted_keys(const toml::table& t) {
        std::vector<std::string> keys;
        for (const auto& [k, v] : t) keys.emplace_back(k.str());
        std::sort(keys.begin(), keys.end());
        return keys;
    }

    static void emit_table(std::string& out, const toml::table& t, const std::string& prefix) {
        const auto keys = sorted_keys(t);
        for (const auto& k : keys) {
            const toml::node& n = *t.get(k);
            if (n.is_table()) continue;
            out += key_text(k) + " = ";
            emit_value(out, n);
            out += "\n";
        }
        for (const auto& k : keys) {
            const toml::node& n = *t.get(k);
            if (!n.is_table()) continue;
            const std::string path = prefix.empty() ? key_text(k) : prefix + "." + key_text(k);
            out += "\n[" + path + "]\n";
            emit_table(out, *n.as_table(), path);
        }
    }
};

} // namespace nlbsm::cli
