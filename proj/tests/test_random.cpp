#include "sketchreg/kernels.hpp"
#include "sketchreg/random.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <unordered_set>

using namespace sketchreg;

namespace {

// Critical value of the one-sample KS statistic at alpha = 0.01.
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

double mean(const Vector& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

TEST_CASE("derived streams do not collide") {
    std::unordered_set<std::uint64_t> keys;
    for (std::uint64_t i = 0; i < 1000000; ++i) keys.insert(derive_stream(42, i).key());
    CHECK(keys.size() == 1000000);
}

TEST_CASE("single-bit index changes flip about half the key bits") {
    double total = 0.0;
    std::size_t count = 0;
    RandomStream rs(derive_stream(7, 0));
    for (int t = 0; t < 10000; ++t) {
        const std::uint64_t idx = rs.next_u64();
        const int bit = static_cast<int>(rs.uniform_index(64));
        const std::uint64_t a = derive_stream(123, idx).key();
        const std::uint64_t b = derive_stream(123, idx ^ (1ULL << bit)).key();
        total += std::popcount(a ^ b) / 64.0;
        ++count;
    }
    CHECK(std::fabs(total / static_cast<double>(count) - 0.5) < 0.02);
}

TEST_CASE("neighbouring streams are uniform by KS") {
    for (std::uint64_t i : {0u, 1u}) {
        const Vector u = draw(derive_stream(2024, i), Distribution::uniform, 1000);
        CHECK(testutil::ks_statistic(u, [](double x) { return x; }) < ks_critical(1000));
    }
    CHECK(draw(derive_stream(2024, 0), Distribution::uniform, 10) !=
          draw(derive_stream(2024, 1), Distribution::uniform, 10));
}

TEST_CASE("streams are deterministic and seed-sensitive") {
    CHECK(draw(derive_stream(5, 3), Distribution::normal, 100) == draw(derive_stream(5, 3), Distribution::normal, 100));
    CHECK(draw(derive_stream(5, 3), Distribution::normal, 100) != draw(derive_stream(6, 3), Distribution::normal, 100));
}

TEST_CASE("bulk and single normal draws agree on every instruction set") {
    const kernels::Isa saved = kernels::active_isa();
    Vector ref;
    for (kernels::Isa isa : {kernels::Isa::scalar, kernels::Isa::avx2, kernels::Isa::avx512}) {
        if (!kernels::isa_supported(isa)) continue;
        kernels::set_isa(isa);
        RandomStream bulk(derive_stream(3, 9));
        Vector v(1003);
        bulk.fill_normal(v);
        if (ref.empty()) ref = v;
        CHECK(v == ref);
        RandomStream one(derive_stream(3, 9));
        bool same = true;
        for (double x : v) same = same && one.normal() == x;
        CHECK(same);
        CHECK(bulk.next_u64() == one.next_u64());
    }
    kernels::set_isa(saved);
}

TEST_CASE("normal draws have unit moments and pass KS") {
    const Vector x = draw(derive_stream(11, 0), Distribution::normal, 100000);
    const double mu = mean(x);
    double var = 0;
    for (double v : x) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / static_cast<double>(x.size() - 1));
    CHECK(std::fabs(mu) < 0.02);
    CHECK(std::fabs(sd - 1.0) < 0.02);
    const auto phi = [](double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); };
    CHECK(testutil::ks_statistic(x, phi) < ks_critical(x.size()));
}

TEST_CASE("normal tail beyond the ziggurat base is populated") {
    const Vector x = draw(derive_stream(12, 0), Distribution::normal, 2000000);
    std::size_t tail = 0;
    for (double v : x) tail += std::fabs(v) > 3.6541528853610088;
    // P(|Z| > R) = 2.58e-4; expected 516 with sd about 23.
    CHECK(tail > 440);
    CHECK(tail < 590);
}

TEST_CASE("rademacher draws are signs with zero mean") {
    const Vector x = draw(derive_stream(13, 0), Distribution::rademacher, 100000);
    for (double v : x) REQUIRE((v == 1.0 || v == -1.0));
    CHECK(std::fabs(mean(x)) < 0.02);
}

TEST_CASE("cauchy draws have median 0 and IQR 2") {
    Vector x = draw(derive_stream(14, 0), Distribution::cauchy, 100000);
    std::sort(x.begin(), x.end());
    const double q1 = x[x.size() / 4];
    const double q3 = x[3 * x.size() / 4];
    CHECK(std::fabs(x[x.size() / 2]) < 0.02);
    CHECK(std::fabs((q3 - q1) - 2.0) < 0.05);
}

TEST_CASE("exponential draws pass KS") {
    const Vector x = draw(derive_stream(15, 0), Distribution::exponential, 20000);
    for (double v : x) REQUIRE(v > 0.0);
    CHECK(testutil::ks_statistic(x, [](double t) { return 1.0 - std::exp(-t); }) < ks_critical(x.size()));
}

TEST_CASE("uniform_index covers its range evenly") {
    const std::size_t s = 10;
    const Vector x = draw(derive_stream(16, 0), Distribution::uniform_index, 100000, s);
    std::vector<double> counts(s, 0.0);
    for (double v : x) {
        REQUIRE(v >= 0.0);
        REQUIRE(v < static_cast<double>(s));
        counts[static_cast<std::size_t>(v)] += 1.0;
    }
    double chi2 = 0;
    for (double c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
    CHECK(chi2 < 21.67); // chi-square 9 dof, p = 0.01
}
