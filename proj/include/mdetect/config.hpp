#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdetect {

/// Flat `key = value` settings. Blank lines and lines starting with '#'
/// are skipped. Later assignments win, so flags applied after the file
/// override it.
class Config {
public:
    static Config parse(std::string_view text, const std::string& origin = "<config>");
    /// Throws ConfigError when the file cannot be read.
    static Config load(const std::string& path);

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::optional<std::string> get(const std::string& key) const;

    /// Typed getters throw ConfigError naming the key on malformed values.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated list.
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
    std::vector<std::int64_t> get_int_list(const std::string& key, const std::vector<std::int64_t>& fallback) const;

    /// Throws ConfigError for any key not in `known`.
    void require_known(const std::vector<std::string>& known) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace mdetect
