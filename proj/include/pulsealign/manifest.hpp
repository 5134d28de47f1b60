#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pulsealign/errors.hpp"

namespace pulsealign {

inline constexpr const char* kToolVersion = "0.1.0";

// Flat `key = value` config document; '#' starts a comment.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

// One manifest per CLI run: enough to reproduce the run from scratch.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> input_digests; // path -> sha256
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    double wall_time_s = 0.0;
    std::vector<std::string> outputs;

    void add_input(const std::string& path);
    void write(const std::string& path) const;
};

} // namespace pulsealign
