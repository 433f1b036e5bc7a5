#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace capmscm {

/// 64-bit finalizer from SplitMix64.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_name(std::string_view s) noexcept;

/// Derive an independent stream seed from a master seed and a list of keys.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0,
                          std::uint64_t k3 = 0) noexcept;

/// Standard normal generator on top of mt19937_64.
///
/// The transform (Box-Muller on 53-bit uniforms) is written out here rather
/// than using std::normal_distribution, whose algorithm differs between
/// standard library implementations. Same seed gives the same sequence on
/// every toolchain.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next();

private:
    double uniform_open();

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace capmscm
