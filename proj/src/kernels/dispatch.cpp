#include "sketchreg/kernels.hpp"

#include "sketchreg/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace sketchreg::kernels {
namespace {

const detail::KernelTable* table_for(Isa isa) noexcept {
    switch (isa) {
    case Isa::avx512: return detail::avx512_table();
    case Isa::avx2: return detail::avx2_table();
    case Isa::scalar: return &detail::scalar_table();
    }
    return &detail::scalar_table();
}

bool cpu_has(Isa isa) noexcept {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
        return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
               __builtin_cpu_supports("fma");
    }
    return false;
#else
    return isa == Isa::scalar;
#endif
}

struct State {
    std::atomic<Isa> isa;
    std::atomic<const detail::KernelTable*> table;
    State() {
        const Isa best = detected_isa();
        isa.store(best);
        table.store(table_for(best));
    }
};

State& state() {
    static State s;
    return s;
}

const detail::KernelTable& active() noexcept { return *state().table.load(std::memory_order_relaxed); }

} // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "avx512") return Isa::avx512;
    return std::nullopt;
}

bool isa_supported(Isa isa) noexcept { return table_for(isa) != nullptr && cpu_has(isa); }

Isa detected_isa() noexcept {
    Isa cap = Isa::avx512;
    if (const char* env = std::getenv("SKETCHREG_SIMD")) {
        if (auto parsed = parse_isa(env)) cap = *parsed;
    }
    for (Isa isa : {Isa::avx512, Isa::avx2}) {
        if (static_cast<int>(isa) <= static_cast<int>(cap) && isa_supported(isa)) return isa;
    }
    return Isa::scalar;
}

Isa active_isa() noexcept { return state().isa.load(); }

void set_isa(Isa isa) {
    require(isa_supported(isa), ErrorCode::InvalidArgument,
            "instruction set " + std::string(isa_name(isa)) + " not available on this CPU");
    state().isa.store(isa);
    state().table.store(table_for(isa));
}

double dot(const double* x, const double* y, std::size_t n) noexcept { return active().dot(x, y, n); }
double asum(const double* x, std::size_t n) noexcept { return active().asum(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) noexcept { active().axpy(a, x, y, n); }
void scal(double a, double* x, std::size_t n) noexcept { active().scal(a, x, n); }
void rot(double* x, double* y, std::size_t n, double c, double s) noexcept { active().rot(x, y, n, c, s); }

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    if (m == 0 || n == 0 || k == 0) return;
    active().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    if (m == 0 || n == 0 || k == 0) return;
    active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}

void normal_fast(std::uint64_t state, double* out, std::size_t n, const double* zx, const double* zr) noexcept {
    active().normal_fast(state, out, n, zx, zr);
}

} // namespace sketchreg::kernels
