#include "sketchreg/random.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"

#include "kernels/rng_common.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace sketchreg {
namespace {

// Ziggurat tables for the standard normal (256 layers, Doornik's layout).
struct Ziggurat {
    static constexpr int kLayers = 256;
    static constexpr double kR = 3.6541528853610088;
    static constexpr double kV = 0.00492867323399;
    std::array<double, kLayers + 1> x{};
    std::array<double, kLayers + 1> f{}; // exp(-x^2 / 2) at each edge
    std::array<double, kLayers> ratio{};

    Ziggurat() {
        double fr = std::exp(-0.5 * kR * kR);
        x[0] = kV / fr;
        x[1] = kR;
        x[kLayers] = 0.0;
        for (int i = 2; i < kLayers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + fr));
            fr = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
        for (int i = 0; i <= kLayers; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
    }
};

const Ziggurat& zig() {
    static const Ziggurat z;
    return z;
}

// Slow path for a candidate rejected by the fast test: the wedge and tail
// tests, and any retries, draw from a private stream seeded by the candidate,
// so every output consumes exactly one word of the parent stream.
double normal_slow(std::uint64_t bits) noexcept {
    const Ziggurat& z = zig();
    RandomStream sub = RandomStream::from_state(mix64(bits ^ 0x6a09e667f3bcc909ULL));
    for (;;) {
        const double u = 2.0 * kernels::detail::unit52(bits) - 1.0;
        const auto i = static_cast<std::size_t>(bits & kernels::detail::kLayerMask);
        if (std::fabs(u) < z.ratio[i]) return u * z.x[i];
        if (i == 0) {
            double t, y;
            do {
                t = std::log(sub.uniform()) / Ziggurat::kR;
                y = std::log(sub.uniform());
            } while (-2.0 * y < t * t);
            return u < 0 ? t - Ziggurat::kR : Ziggurat::kR - t;
        }
        const double xv = u * z.x[i];
        if (z.f[i + 1] + sub.uniform() * (z.f[i] - z.f[i + 1]) < std::exp(-0.5 * xv * xv)) return xv;
        bits = sub.next_u64();
    }
}

} // namespace

double RandomStream::normal() noexcept {
    double v;
    const Ziggurat& z = zig();
    kernels::normal_fast(state_, &v, 1, z.x.data(), z.ratio.data());
    const std::uint64_t bits = next_u64();
    return std::isnan(v) ? normal_slow(bits) : v;
}

double RandomStream::cauchy() noexcept { return std::tan(std::numbers::pi * (uniform() - 0.5)); }

double RandomStream::exponential() noexcept { return -std::log(uniform()); }

void RandomStream::fill_normal(std::span<double> out) noexcept {
    const Ziggurat& z = zig();
    kernels::normal_fast(state_, out.data(), out.size(), z.x.data(), z.ratio.data());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (std::isnan(out[i])) out[i] = normal_slow(mix64(state_ + (i + 1) * kernels::detail::kGolden));
    state_ += out.size() * kernels::detail::kGolden;
}

void RandomStream::fill_rademacher(std::span<double> out) noexcept {
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t bits = next_u64();
        for (int b = 0; b < 64 && i < out.size(); ++b, ++i, bits >>= 1) out[i] = (bits & 1) ? 1.0 : -1.0;
    }
}

void RandomStream::fill_cauchy(std::span<double> out) noexcept {
    for (double& v : out) v = cauchy();
}

Vector draw(const SeedSpec& seed, Distribution dist, std::size_t n, std::uint64_t bound) {
    RandomStream rs(seed);
    Vector out(n);
    switch (dist) {
    case Distribution::normal: rs.fill_normal(out); break;
    case Distribution::rademacher: rs.fill_rademacher(out); break;
    case Distribution::cauchy: rs.fill_cauchy(out); break;
    case Distribution::exponential:
        for (double& v : out) v = rs.exponential();
        break;
    case Distribution::uniform:
        for (double& v : out) v = rs.uniform();
        break;
    case Distribution::uniform_index:
        require(bound > 0, ErrorCode::InvalidArgument, "uniform_index needs a positive bound");
        for (double& v : out) v = static_cast<double>(rs.uniform_index(bound));
        break;
    }
    return out;
}

} // namespace sketchreg
