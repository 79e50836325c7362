#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgdlab {

// parse/validation failure; `where` carries file:line or the offending key
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what) {}
};

// Flat key = value file with [section] headers, # or ; comments. Keys are
// addressed as "section.key" ("" section for the preamble).
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::filesystem::path& path);
    static KeyValueConfig parse_string(const std::string& text, const std::string& origin);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        std::vector<double> fallback) const;
    std::vector<long long> get_int_list(const std::string& key,
                                        std::vector<long long> fallback) const;

    std::optional<double> get_optional_double(const std::string& key) const;

    // consumed-key accounting so unknown keys can be rejected
    std::vector<std::string> unused_keys() const;
    const std::string& origin_of(const std::string& key) const;

private:
    std::map<std::string, std::string> entries_;
    std::map<std::string, std::string> origins_;  // key -> file:line
    mutable std::map<std::string, bool> used_;
};

}  // namespace sgdlab
