#pragma once

#include "sketchreg/leverage.hpp"
#include "sketchreg/matrix.hpp"
#include "sketchreg/matrixgen.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/precond.hpp"
#include "sketchreg/random.hpp"
#include "sketchreg/sketch.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

// l2 regression solvers: sketch-and-solve, leverage sampling, and the
// preconditioned iterative solvers LSQR and Chebyshev semi-iteration.
namespace sketchreg {

enum class SamplingMode { bernoulli, with_replacement };

const char* to_string(SamplingMode mode) noexcept;
SamplingMode parse_sampling_mode(const std::string& text);

struct SolverConfig {
    double eps = 0.5;
    double delta = 0.1;
    std::size_t s = 0; // 0 selects the variant default
    SamplingMode sampling_mode = SamplingMode::bernoulli;
    std::size_t max_iters = 500;
    double tol = 1e-14;
    double gamma_oversample = 2.0;
    std::uint64_t seed = 0;
    std::size_t block_rows = kDefaultBlockRows;
};

struct SolveReport {
    std::string method;
    std::string variant;
    std::size_t s = 0;
    std::uint64_t seed = 0;
    Vector x_hat;
    double f_hat = 0.0;
    std::optional<double> rel_err_f;
    std::optional<double> rel_err_x;
    std::size_t iterations = 0;
    bool converged = true;
    Vector residual_history;
    std::optional<double> kappa_bound; // predicted cond2(A N), LSRN only
    CostLedger ledger;
    double wall_ms = 0.0;
};

/// Fills f_hat under `norm` and the relative errors against the instance optimum.
void score_against(SolveReport& report, const ProblemInstance& inst);

/// Sketches [A b] with one operator in one pass and solves the small problem
/// by the min-length rule. Throws RankDeficient when Phi A loses rank.
SolveReport sketch_and_solve_l2(const ProblemInstance& inst, const SketchOperator& op, const SolverConfig& cfg = {});

struct SampledProblem {
    DenseMatrix a;
    Vector b;
    std::vector<std::size_t> rows; // source row of each sampled row
    Vector weights;                // rescaling applied to each sampled row
};

/// Samples rows with p_i = lev_i / sum lev. Bernoulli keeps row i with
/// q_i = min(1, s p_i) and weight q_i^-1/2; with replacement draws s rows with
/// weight (s p_i)^-1/2.
SampledProblem leverage_sample_l2(const DenseMatrix& a, std::span<const double> b, std::span<const double> scores,
                                  std::size_t s, SamplingMode mode, SeedSpec seed);

/// Samples by `scores` and solves the sample by the min-length rule. A sample
/// that loses rank yields the truncated solution rather than an error.
SolveReport sample_and_solve_l2(const ProblemInstance& inst, std::span<const double> scores, std::string label,
                                const SolverConfig& cfg = {});

using LinearOp = std::function<Vector(std::span<const double>)>;

struct IterOptions {
    double tol = 1e-14;
    std::size_t max_iters = 500;
    bool throw_on_max_iters = true;
};

/// LSQR on min ||A N y - b||, returning x = N y. Stops when the estimated
/// ||(AN)^T r|| / (||AN||_F ||r||) or ||r|| / ||b|| falls to tol. Records two
/// reductions per bidiagonalization step, the first step included.
/// residual_history holds the LSQR estimates of ||r_k||.
SolveReport lsqr(const LinearOp& apply_a, const LinearOp& apply_at, std::span<const double> b,
                 const Preconditioner* precond = nullptr, const IterOptions& opt = {}, CostLedger* ledger = nullptr);

/// Chebyshev semi-iteration on the normal equations of A N with sigma(A N)
/// assumed inside `interval`. One reduction per step (the A^T r product).
/// Stops when ||(AN)^T r|| / ||(AN)^T b|| <= tol; throws Divergence when that
/// ratio grows tenfold over its best value.
SolveReport chebyshev_semi_iterative(const LinearOp& apply_a, const LinearOp& apply_at, std::span<const double> b,
                                     std::pair<double, double> interval, const Preconditioner* precond = nullptr,
                                     const IterOptions& opt = {}, CostLedger* ledger = nullptr);

enum class IterativeMethod { lsqr, cs };

/// LSRN: lsrn_precond with gamma, then LSQR or CS on the streamed A. CS uses
/// the predicted interval of the preconditioner.
SolveReport lsrn_solve(const ProblemInstance& inst, IterativeMethod method, const SolverConfig& cfg = {});

/// Matrix-vector operators that stream A, one pass per application.
std::pair<LinearOp, LinearOp> stream_operators(RowBlockStream& stream, CostLedger* ledger);

} // namespace sketchreg
