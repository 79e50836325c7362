#include "sgdlab/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sgdlab {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
    KeyValueConfig config;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']') throw ConfigError(where, "unterminated section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ConfigError(where, "empty section name");
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(where, "empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (config.entries_.count(full)) throw ConfigError(where, "duplicate key '" + full + "'");
        config.entries_[full] = value;
        config.origins_[full] = where;
    }
    return config;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
    origins_[key] = "override";
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    used_[key] = true;
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    used_[key] = true;
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0') {
        throw ConfigError(origin_of(key), "'" + key + "' is not a number");
    }
    return v;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    used_[key] = true;
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0' || v != static_cast<long long>(v)) {
        throw ConfigError(origin_of(key), "'" + key + "' is not an integer");
    }
    return static_cast<long long>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    used_[key] = true;
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(origin_of(key), "'" + key + "' must be true or false");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    std::vector<double> fallback) const {
    used_[key] = true;
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || *end != '\0') {
            throw ConfigError(origin_of(key), "'" + key + "' has a non-numeric entry");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(origin_of(key), "'" + key + "' is empty");
    return out;
}

std::vector<long long> KeyValueConfig::get_int_list(const std::string& key,
                                                    std::vector<long long> fallback) const {
    const auto doubles = get_double_list(
        key, std::vector<double>(fallback.begin(), fallback.end()));
    std::vector<long long> out;
    for (double v : doubles) {
        if (v != static_cast<long long>(v)) {
            throw ConfigError(origin_of(key), "'" + key + "' has a non-integer entry");
        }
        out.push_back(static_cast<long long>(v));
    }
    return out;
}

std::optional<double> KeyValueConfig::get_optional_double(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_double(key, 0.0);
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, value] : entries_) {
        (void)value;
        if (!used_.count(key)) out.push_back(key);
    }
    return out;
}

const std::string& KeyValueConfig::origin_of(const std::string& key) const {
    static const std::string unknown = "config";
    const auto it = origins_.find(key);
    return it == origins_.end() ? unknown : it->second;
}

}  // namespace sgdlab
