#pragma once

#include "sketchreg/matrix.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Synthetic regression instances with known optima: uniform-leverage (UG/UB)
// and nonuniform-leverage (NG/NB) families plus two stacking schemes.
namespace sketchreg {

enum class Family { UG, UB, NG, NB };
enum class StackMode { none, stack1, stack2 };
enum class NormKind { l2, l1 };

std::string_view to_string(Family f) noexcept;
std::string_view to_string(StackMode s) noexcept;
std::optional<Family> parse_family(std::string_view s) noexcept;
std::optional<StackMode> parse_stack(std::string_view s) noexcept;

/// Condition numbers at or above this value label an instance "bad" (UB/NB).
inline constexpr double kBadKappa = 100.0;

struct ProblemInstance {
    DenseMatrix a;
    Vector b;
    std::optional<Vector> x_star;
    std::optional<double> f_star; // under `norm`
    Family family = Family::UG;
    NormKind norm = NormKind::l2;
    double kappa_target = 1.0;
    std::size_t repnum = 1;
    StackMode stack_mode = StackMode::none;
    double mass_fraction = 0.0; // ||U U^T b|| / ||b||
    double alpha = 0.0;         // NG/NB scale on the Gaussian block
    std::size_t top_rows = 0;   // NG/NB: rows of one (alpha B  R) block
    std::uint64_t seed = 0;
};

/// A = U diag(linspace(1, 1/kappa, n)) V^T, b = A x + 0.25 ||A x|| / ||e|| e.
ProblemInstance gen_uniform(std::size_t m, std::size_t n, double kappa, std::uint64_t seed);

/// A = (alpha B  R; 0  I) with B Gaussian (m - d/2) x d/2 and R = 1e-8 U(0,1).
ProblemInstance gen_nonuniform(std::size_t m, std::size_t d, double alpha, std::uint64_t seed);

/// Scale alpha for which gen_nonuniform(m, d, alpha, seed) has condition number kappa.
double calibrate_alpha(std::size_t m, std::size_t d, double kappa, std::uint64_t seed);

/// Dispatches on the family; NG/NB calibrate alpha to reach kappa.
ProblemInstance generate(Family family, std::size_t m, std::size_t n, double kappa, std::uint64_t seed);

/// Replaces the l2 optimum with the l1 optimum from the interior-point oracle.
void attach_l1_optimum(ProblemInstance& inst);

/// STACK1 replicates (A; b). STACK2 replicates only the (alpha B  R) block and
/// recomputes the optimum. Throws IllegalStack for STACK2 on UG/UB.
ProblemInstance stack(const ProblemInstance& inst, std::size_t repnum, StackMode mode);

/// Same rows as stack(...) written to RNLA files without materializing them.
/// Returns the instance metadata and optimum with `a` and `b` left empty.
ProblemInstance write_stacked(const ProblemInstance& inst, std::size_t repnum, StackMode mode, const std::string& a_path,
                   const std::string& b_path);

} // namespace sketchreg
