#pragma once

#include "sketchreg/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>

// Counter-based splittable randomness. A stream is identified by a 64-bit key
// derived from a master seed and an index, so per-block streams do not depend
// on how work is scheduled.
namespace sketchreg {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    /// Stream key; injective in stream_id for a fixed master seed.
    constexpr std::uint64_t key() const noexcept {
        return mix64(master_seed ^ mix64(stream_id + 0x9e3779b97f4a7c15ULL));
    }
    bool operator==(const SeedSpec&) const = default;
};

constexpr SeedSpec derive_stream(std::uint64_t master, std::uint64_t index) noexcept {
    return SeedSpec{master, index};
}

/// Child stream of a stream: uses the parent key as the new master seed.
constexpr SeedSpec derive_stream(const SeedSpec& parent, std::uint64_t index) noexcept {
    return SeedSpec{parent.key(), index};
}

enum class Distribution { normal, rademacher, cauchy, exponential, uniform, uniform_index };

class RandomStream {
public:
    explicit RandomStream(const SeedSpec& seed) noexcept : state_(seed.key()) {}
    /// Stream positioned at a raw counter value.
    static RandomStream from_state(std::uint64_t state) noexcept {
        RandomStream rs(SeedSpec{});
        rs.state_ = state;
        return rs;
    }

    std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }
    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return to_unit(next_u64()); }
    /// Standard normal by a 256-layer ziggurat; consumes one word per draw.
    double normal() noexcept;
    double rademacher() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }
    /// Standard Cauchy via tan(pi (u - 1/2)).
    double cauchy() noexcept;
    /// Unit-rate exponential via -ln u.
    double exponential() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    void fill_normal(std::span<double> out) noexcept;
    void fill_rademacher(std::span<double> out) noexcept;
    void fill_cauchy(std::span<double> out) noexcept;

    static double to_unit(std::uint64_t x) noexcept {
        return (static_cast<double>(static_cast<std::int64_t>(x >> 11)) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// n i.i.d. draws. `bound` is the range for uniform_index and is ignored otherwise.
Vector draw(const SeedSpec& seed, Distribution dist, std::size_t n, std::uint64_t bound = 0);

} // namespace sketchreg
