#pragma once

// Run manifest: command, config digest, seed, tool version, timestamp and
// the artifacts written with their column schema.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlbsm/errors.hpp"

namespace nlbsm::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

struct Artifact {
    std::string file;
    std::vector<std::string> columns;  // empty for JSON reports
};

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> shots;
    std::string tool_version{kToolVersion};
    std::string timestamp;
    std::vector<Artifact> artifacts;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config_digest"] = "sha256:" + config_digest;
        j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
        j["shots"] = shots ? nlohmann::ordered_json(*shots) : nlohmann::ordered_json(nullptr);
        j["tool_version"] = tool_version;
        j["timestamp"] = timestamp;
        j["csv_schema_version"] = kCsvSchemaVersion;
        nlohmann::ordered_json arts = nlohmann::ordered_json::array();
        for (const auto& a : artifacts) {
            nlohmann::ordered_json e;
            e["file"] = a.file;
            if (!a.columns.empty()) e["columns"] = a.columns;
            arts.push_back(std::move(e));
        }
        j["artifacts"] = std::move(arts);
        return j;
    }
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace nlbsm::cli
