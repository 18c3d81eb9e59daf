#pragma once

#include "sketchreg/matrix.hpp"
#include "sketchreg/matrixgen.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/precond.hpp"
#include "sketchreg/random.hpp"
#include "sketchreg/sketch.hpp"
#include "sketchreg/solve_l2.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

// The l1 pipeline: condition with an l1 sketch, sample rows by the l1 norms
// of the conditioned basis, and solve each sample exactly.
namespace sketchreg {

/// QR-type l1 conditioning: N = R^-1 from the QR of Phi A, with R scaled to a
/// positive diagonal. s = 0 selects the variant default. One pass. Throws
/// RankDeficient.
Preconditioner condition_l1(RowBlockStream& a, SketchVariant variant, std::size_t s, SeedSpec seed,
                            CostLedger* ledger = nullptr);

struct SamplingDistribution {
    Vector probs;                // Bernoulli inclusion probabilities q_i = min(1, scale norm_i)
    Vector base_norms;           // (estimated) l1 row norms of A N
    double scale = 0.0;
    double kappa_bar_used = 0.0; // kappa in the mapper rule, 0 for the normalized rule
};

struct L1SamplingOptions {
    bool fast = false; // estimate norms through an n x r Gaussian, r = ceil(8 ln m)
    /// When set, q_i = min(1, s norm_i / (kappa sqrt(n))) instead of
    /// min(1, s norm_i / sum norms).
    std::optional<double> mapper_kappa;
    /// Normalized rule only: raise the scale until sum q_i = s, so s is the
    /// expected sample size even when some q_i are capped at 1.
    bool expected_size = false;
    SeedSpec seed{};
};

/// Scale t with sum_i min(1, t w_i) = s; +inf when s reaches the number of
/// nonzero weights.
double expected_size_scale(std::span<const double> w, double s);

/// One pass computing the row norms of A N and the inclusion probabilities.
SamplingDistribution l1_sampling_distribution(RowBlockStream& a, const Preconditioner& n_mat, std::size_t s,
                                              const L1SamplingOptions& opt = {}, CostLedger* ledger = nullptr);

/// s >= 16 (2^p + 2) kappa^p (n ln(12/eps) + ln(2/delta)) / (p^2 eps^2), rounded
/// up. Throws EpsOutOfRange unless 0 < eps < 1/7.
double sample_size_l1(double kappa_bar, std::size_t n, double eps, double delta, double p = 1.0);

struct L1Config {
    SketchVariant variant = SketchVariant::sparse_cauchy;
    std::size_t s_condition = 0; // 0 selects the sketch default
    std::size_t s = 0;           // 0 selects min(theory, 100 n)
    bool fast = false;
    std::optional<double> mapper_kappa;
    bool expected_size = true;
    double eps = 0.1;
    double delta = 0.1;
    std::uint64_t seed = 0;
    std::size_t block_rows = kDefaultBlockRows;
    double ipm_tol = 1e-8;
};

struct L1Run {
    std::vector<SolveReport> queries;
    double theory_s = 0.0; // sample size from the theorem, logged only
    std::size_t s = 0;
    std::vector<std::size_t> sample_rows; // rows kept per query
    CostLedger ledger;           // conditioning and sampling: 2 passes
    CostLedger objective_ledger; // objective evaluation: 1 pass
    // Each query's report carries the sum of both ledgers.
};

/// Pass 1 conditions [A -b]; pass 2 draws `n_queries` independent Bernoulli
/// samples and solves each in the homogeneous form; pass 3 evaluates every
/// objective ||A x_k - b||_1. Row i enters query k when u_ki < q_i, that is when
/// its key u_ki / norm_i falls below the scale, so pass 2 keeps the rows with
/// the smallest keys and fixes the scale once all norms are known. A
/// rank-deficient sketch of [A -b] falls back to its truncated SVD basis.
L1Run solve_l1_low_precision(const ProblemInstance& inst, const L1Config& cfg, std::size_t n_queries);

} // namespace sketchreg
