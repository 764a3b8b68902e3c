#include "mdetect/util.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mdetect/error.hpp"

namespace mdetect {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownFeatureSet: return "UnknownFeatureSet";
        case ErrorCode::UnknownFeature: return "UnknownFeature";
        case ErrorCode::MissingColumns: return "MissingColumns";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ExcludedVersion: return "ExcludedVersion";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::InvalidRecord: return "InvalidRecord";
        case ErrorCode::UnsortedInput: return "UnsortedInput";
        case ErrorCode::NoBenignRows: return "NoBenignRows";
        case ErrorCode::TooFewUsers: return "TooFewUsers";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::SingleClassInput: return "SingleClassInput";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
        case ErrorCode::ModelVersionMismatch: return "ModelVersionMismatch";
        case ErrorCode::IncompleteMatrix: return "IncompleteMatrix";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) { return mix_seed(seed, fnv1a64(tag)); }

std::size_t Rng::uniform_index(std::size_t n) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> out(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string format_double(double value) {
    if (std::isnan(value)) return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) return "";
    return std::string(buf, ptr);
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    std::string out = buf;
    // avoid rendering "-0.000"
    if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split(std::string_view text, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace mdetect
