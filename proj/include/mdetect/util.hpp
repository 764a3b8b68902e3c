#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mdetect {

/// SplitMix64 finalizer. Used to derive independent child seeds from a
/// parent seed and a tag so that every pipeline stage has its own stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

/// Seeded generator with distribution code kept in-house: the standard
/// library distributions are implementation-defined, and generated corpora
/// must be byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);

    /// Uniform double in [0, 1).
    double uniform01();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// 0..n-1
std::vector<std::size_t> iota_indices(std::size_t n);

/// FNV-1a 64-bit, hex encoded. Used for catalog fingerprints and digests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Fixed-point rendering with the given number of decimals.
std::string format_fixed(double value, int decimals);

std::string to_lower(std::string_view text);
std::vector<std::string> split(std::string_view text, char delim);
std::string_view trim(std::string_view text);
std::string join(std::span<const std::string> parts, std::string_view sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace mdetect
