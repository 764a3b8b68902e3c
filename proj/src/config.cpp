#include "mdetect/config.hpp"

#include <algorithm>
#include <charconv>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

namespace {

template <typename T>
T parse_integral(const std::string& key, std::string_view text) {
    T v{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        fail(ErrorCode::ConfigError, "setting '" + key + "' expects an integer, got '" + std::string(text) + "'");
    return v;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
    Config c;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorCode::ConfigError, origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) fail(ErrorCode::ConfigError, origin + ":" + std::to_string(line_no) + ": empty key");
        c.values_[key] = std::string(trim(line.substr(eq + 1)));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, "cannot read config '" + path + "': " + e.what());
    }
    return parse(text, path);
}

std::optional<std::string> Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    return v ? parse_integral<std::int64_t>(key, *v) : fallback;
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    return v ? parse_integral<std::uint64_t>(key, *v) : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    double out = 0.0;
    const auto t = trim(*v);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        fail(ErrorCode::ConfigError, "setting '" + key + "' expects a number, got '" + *v + "'");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const auto t = to_lower(*v);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    fail(ErrorCode::ConfigError, "setting '" + key + "' expects true or false, got '" + *v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (const auto& part : split(*v, ',')) {
        const auto t = trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::vector<std::int64_t> Config::get_int_list(const std::string& key,
                                               const std::vector<std::int64_t>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& s : get_list(key, {})) out.push_back(parse_integral<std::int64_t>(key, s));
    return out;
}

void Config::require_known(const std::vector<std::string>& known) const {
    for (const auto& [k, _] : values_)
        if (std::find(known.begin(), known.end(), k) == known.end())
            fail(ErrorCode::ConfigError, "unknown setting '" + k + "'");
}

}  // namespace mdetect
