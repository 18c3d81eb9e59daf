#pragma once

#include "sketchreg/matrixgen.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/solve_l2.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Experiment harness: grids of (family, method, size) cells run over seeded
// trials, with JSON-lines records and median CSV summaries.
namespace sketchreg {

inline constexpr std::string_view kReportSchema = "sketchreg.bench.v1";

enum class Method { proj_cw, proj_gaussian, proj_rademacher, proj_srdht, samp_appr, samp_unif };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view s) noexcept;

/// Which axis a plan sweeps: embedding dimension s, row count (STACK1 copies
/// of the base instance), or column count.
enum class Sweep { embedding_dim, rows, cols };

std::string_view to_string(Sweep s) noexcept;
std::optional<Sweep> parse_sweep(std::string_view s) noexcept;

struct ExperimentPlan {
    std::string name = "plan";
    Sweep sweep = Sweep::embedding_dim;
    std::vector<Family> families;
    std::vector<Method> methods;
    std::size_t m = 20000;
    std::size_t n = 100;
    double kappa = 1e6;
    std::vector<std::size_t> s_grid;      // the rows and cols sweeps use s_grid.front()
    bool s_per_n = false;                 // s_grid holds multiples of n
    std::vector<std::size_t> repnum_grid; // rows sweep
    std::vector<std::size_t> n_grid;      // cols sweep
    std::size_t trials = 3;
    std::uint64_t seed = 0;
    std::size_t block_rows = kDefaultBlockRows;
};

/// Desk-scale plans: "fig3" (error vs s on all families), "fig5" (rows grow by
/// STACK1) and "fig6" (columns grow at fixed s).
ExperimentPlan builtin_plan(std::string_view name);

struct BenchRecord {
    std::string plan;
    std::string panel; // error-vs-s, error-vs-m or error-vs-n
    std::string family;
    std::string method;
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t s = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::string status = "ok"; // error code name when the trial failed
    std::optional<double> rel_err_f;
    std::optional<double> rel_err_x;
    double wall_ms = 0.0;
    std::uint64_t passes = 0;
    std::uint64_t reductions = 0;
};

/// Runs one method on one instance. Failures come back as a record with the
/// error code in `status`.
BenchRecord run_trial(const ProblemInstance& inst, Method method, std::size_t s, std::uint64_t seed,
                      std::size_t block_rows = kDefaultBlockRows);

/// One record per (cell, trial). Trials of a cell use distinct derived seeds;
/// cells run in order and each one uses the block-parallel passes inside.
std::vector<BenchRecord> run_plan(const ExperimentPlan& plan);

struct CellSummary {
    std::string plan, panel, family, method;
    std::size_t m = 0, n = 0, s = 0;
    std::size_t trials = 0, failures = 0;
    // Medians over the successful trials.
    std::optional<double> rel_err_f, rel_err_x;
    double wall_ms = 0.0;
    double passes = 0.0, reductions = 0.0;
};

/// Groups records by cell in first-seen order.
std::vector<CellSummary> summarize(const std::vector<BenchRecord>& records);

/// Header of the CSV summary, in column order.
const std::vector<std::string>& summary_columns();

/// One JSON object per line: a header {"schema", "plan", "records"} then the
/// records. `deterministic` writes wall_ms as 0 so files compare bytewise.
std::string records_to_jsonl(const std::string& plan, const std::vector<BenchRecord>& records,
                             bool deterministic = false);
std::vector<BenchRecord> records_from_jsonl(const std::string& text);
std::string summary_to_csv(const std::vector<CellSummary>& cells, bool deterministic = false);

/// Writes `<prefix>.jsonl` and `<prefix>.csv`. Throws Io.
void emit_report(const std::string& prefix, const std::string& plan, const std::vector<BenchRecord>& records,
                 bool deterministic = false);

/// {method, variant, s, seed, iters, passes, reductions, rel_err_f, rel_err_x,
/// wall_ms} on one line; missing errors are null.
std::string solve_report_json(const SolveReport& rep, bool deterministic = false);
/// Matching CSV header and row.
std::string solve_report_csv_header();
std::string solve_report_csv_row(const SolveReport& rep, bool deterministic = false);

} // namespace sketchreg
