// sketchreg: generate instances, apply sketches, and run the l2 and l1
// solvers and experiment plans from the command line.

#include "sketchreg/bench.hpp"
#include "sketchreg/error.hpp"
#include "sketchreg/l1core.hpp"
#include "sketchreg/leverage.hpp"
#include "sketchreg/linalg.hpp"
#include "sketchreg/matrixgen.hpp"
#include "sketchreg/parallel.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/precond.hpp"
#include "sketchreg/sketch.hpp"
#include "sketchreg/solve_l1.hpp"
#include "sketchreg/solve_l2.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace sketchreg;
using Json = nlohmann::ordered_json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t block_rows = kDefaultBlockRows;
    bool deterministic = false;
};

// Sizes accept scientific notation ("1e6").
std::size_t as_count(double v, const char* what) {
    require(v >= 0.0 && std::floor(v) == v && v < 1e18, ErrorCode::InvalidArgument,
            std::string(what) + " must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

SketchVariant variant_of(const std::string& name) {
    const auto v = parse_variant(name);
    require(v.has_value(), ErrorCode::InvalidArgument, "unknown sketch variant '" + name + "'");
    return *v;
}

std::string meta_path(const std::string& a_path) { return a_path + ".meta.json"; }

void write_meta(const std::string& a_path, const ProblemInstance& inst, std::size_t m, std::size_t n) {
    Json j;
    j["family"] = std::string(to_string(inst.family));
    j["m"] = m;
    j["n"] = n;
    j["kappa"] = inst.kappa_target;
    j["seed"] = inst.seed;
    j["repnum"] = inst.repnum;
    j["stack"] = std::string(to_string(inst.stack_mode));
    j["norm"] = inst.norm == NormKind::l1 ? "l1" : "l2";
    j["f_star"] = inst.f_star ? Json(*inst.f_star) : Json(nullptr);
    j["x_star"] = inst.x_star ? Json(*inst.x_star) : Json(nullptr);
    std::ofstream f(meta_path(a_path));
    require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + meta_path(a_path));
    f << j.dump() << '\n';
}

// Loads A and b; the optimum comes from the metadata file when present.
ProblemInstance load_instance(const std::string& a_path, const std::string& b_path, std::string meta,
                              NormKind norm) {
    ProblemInstance inst;
    inst.a = read_matrix(a_path);
    inst.b = read_vector(b_path);
    inst.norm = norm;
    require(inst.b.size() == inst.a.rows(), ErrorCode::DimensionMismatch, "rhs length differs from the rows of A");
    if (meta.empty() && std::ifstream(meta_path(a_path))) meta = meta_path(a_path);
    if (meta.empty()) return inst;
    std::ifstream f(meta);
    require(static_cast<bool>(f), ErrorCode::Io, "cannot open " + meta);
    Json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("bad metadata: ") + e.what());
    }
    if (const auto fam = parse_family(j.value("family", ""))) inst.family = *fam;
    // The recorded optimum only applies to the norm it was computed for.
    if (j.value("norm", "l2") == (norm == NormKind::l1 ? "l1" : "l2")) {
        if (!j["f_star"].is_null()) inst.f_star = j["f_star"].get<double>();
        if (!j["x_star"].is_null()) inst.x_star = j["x_star"].get<Vector>();
    }
    return inst;
}

// Writes one line per report to `path` (stdout when empty) and, optionally, CSV.
void emit(const std::vector<SolveReport>& reps, const std::string& path, const std::string& csv, bool deterministic) {
    std::ostringstream js;
    for (const SolveReport& r : reps) js << solve_report_json(r, deterministic) << '\n';
    if (path.empty()) {
        std::cout << js.str();
    } else {
        std::ofstream f(path, std::ios::binary);
        require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + path);
        f << js.str();
    }
    if (!csv.empty()) {
        std::ofstream f(csv, std::ios::binary);
        require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + csv);
        f << solve_report_csv_header() << '\n';
        for (const SolveReport& r : reps) f << solve_report_csv_row(r, deterministic) << '\n';
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized sketching solvers for l2 and l1 regression"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");

    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->envname("SKETCHREG_SEED");
    app.add_option("--threads", g.threads, "Worker threads, 0 for all cores")->capture_default_str();
    app.add_option("--block-rows", g.block_rows, "Rows per streamed block")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "Write wall_ms as 0 so report files compare bytewise");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic instance");
    std::string gen_family, gen_stack = "none", gen_out, gen_rhs;
    double gen_m = 0, gen_n = 0, gen_kappa = 1e6, gen_repnum = 1;
    bool gen_l1 = false;
    gen->add_option("--family", gen_family, "UG, UB, NG or NB")->required();
    gen->add_option("--m", gen_m, "Rows of the base instance")->required();
    gen->add_option("--n,--d", gen_n, "Columns")->required();
    gen->add_option("--kappa", gen_kappa, "Target condition number")->capture_default_str();
    gen->add_option("--repnum", gen_repnum, "Stacked copies")->capture_default_str();
    gen->add_option("--stack", gen_stack, "none, stack1 or stack2")->capture_default_str();
    gen->add_flag("--l1", gen_l1, "Record the l1 optimum instead of the l2 optimum");
    gen->add_option("--out", gen_out, "Matrix file (RNLA)")->required();
    gen->add_option("--rhs", gen_rhs, "Right-hand side file (RNLA)")->required();

    // sketch
    auto* sk = app.add_subcommand("sketch", "Apply a sketch to a matrix file in one pass");
    std::string sk_variant = "gaussian", sk_in, sk_out;
    double sk_s = 0, sk_eps = 0.5, sk_delta = 0.1;
    sk->add_option("--variant", sk_variant, "Sketch variant")->capture_default_str();
    sk->add_option("--s", sk_s, "Embedding dimension, 0 for the variant default");
    sk->add_option("--eps", sk_eps, "Distortion for the default dimension")->capture_default_str();
    sk->add_option("--delta", sk_delta, "Failure probability for the default dimension")->capture_default_str();
    sk->add_option("--in", sk_in, "Input matrix")->required();
    sk->add_option("--out", sk_out, "Output sketch")->required();

    // lev
    auto* lev = app.add_subcommand("lev", "Leverage scores");
    std::string lev_method = "approx", lev_in, lev_out, lev_proj;
    double lev_c1 = 0, lev_r2 = 0;
    lev->add_option("--method", lev_method, "exact or approx")->capture_default_str();
    lev->add_option("--proj", lev_proj, "First projection variant (default picks CW or Gaussian)");
    lev->add_option("--c1", lev_c1, "First projection dimension, 0 for the default");
    lev->add_option("--r2", lev_r2, "Second projection dimension, 0 for ceil(8 ln m)");
    lev->add_option("--in", lev_in, "Input matrix")->required();
    lev->add_option("--out", lev_out, "Output score vector");

    // precond-quality
    auto* pq = app.add_subcommand("precond-quality", "cond2(A N) of a sketch-based preconditioner");
    std::string pq_kind = "qr", pq_variant = "gaussian", pq_in;
    double pq_s = 0, pq_gamma = 2.0;
    pq->add_option("--kind", pq_kind, "qr or lsrn")->capture_default_str();
    pq->add_option("--variant", pq_variant, "Sketch variant for qr")->capture_default_str();
    pq->add_option("--s", pq_s, "Embedding dimension for qr");
    pq->add_option("--gamma", pq_gamma, "Oversampling for lsrn")->capture_default_str();
    pq->add_option("--in", pq_in, "Input matrix")->required();

    // solve-l2
    auto* l2 = app.add_subcommand("solve-l2", "Least squares by sketching, sampling or preconditioned iteration");
    std::string l2_method = "sketch", l2_variant = "gaussian", l2_in, l2_rhs, l2_meta, l2_report, l2_csv,
                l2_sampling = "bernoulli";
    double l2_s = 0;
    SolverConfig l2_cfg;
    l2->add_option("--method", l2_method, "sketch, sample-appr, sample-exact, sample-unif, lsqr, lsrn-lsqr or lsrn-cs")
        ->capture_default_str();
    l2->add_option("--variant", l2_variant, "Sketch variant for --method sketch")->capture_default_str();
    l2->add_option("--s", l2_s, "Embedding dimension or sample size, 0 for the default");
    l2->add_option("--eps", l2_cfg.eps)->capture_default_str();
    l2->add_option("--delta", l2_cfg.delta)->capture_default_str();
    l2->add_option("--gamma", l2_cfg.gamma_oversample, "LSRN oversampling")->capture_default_str();
    l2->add_option("--tol", l2_cfg.tol)->capture_default_str();
    l2->add_option("--max-iters", l2_cfg.max_iters)->capture_default_str();
    l2->add_option("--sampling", l2_sampling, "bernoulli or replacement")->capture_default_str();
    l2->add_option("--in", l2_in, "Matrix file")->required();
    l2->add_option("--rhs", l2_rhs, "Right-hand side file")->required();
    l2->add_option("--meta", l2_meta, "Metadata with the optimum (default <in>.meta.json)");
    l2->add_option("--report", l2_report, "JSON-lines report (default stdout)");
    l2->add_option("--csv", l2_csv, "CSV report");

    // solve-l1
    auto* l1 = app.add_subcommand("solve-l1", "Least absolute deviations by conditioning and sampling");
    std::string l1_variant = "spct", l1_s = "auto", l1_in, l1_rhs, l1_meta, l1_report, l1_csv;
    double l1_queries = 5, l1_s_cond = 0;
    L1Config l1_cfg;
    bool l1_exact = false;
    std::optional<double> l1_mapper;
    l1->add_option("--variant", l1_variant, "Conditioning sketch: ct, spct, ret or fct")->capture_default_str();
    l1->add_option("--s-condition", l1_s_cond, "Conditioning dimension, 0 for the default");
    l1->add_option("--s", l1_s, "Sample size or auto")->capture_default_str();
    l1->add_option("--queries", l1_queries, "Independent samples drawn in the sampling pass")->capture_default_str();
    l1->add_flag("--fast", l1_cfg.fast, "Estimate row norms through a Gaussian projection");
    l1->add_option("--mapper-kappa", l1_mapper, "Use q_i = min(1, s |u_i|_1 / (kappa sqrt n))");
    l1->add_option("--eps", l1_cfg.eps)->capture_default_str();
    l1->add_option("--delta", l1_cfg.delta)->capture_default_str();
    l1->add_flag("--exact", l1_exact, "Solve the full problem with the interior-point engine");
    l1->add_option("--in", l1_in, "Matrix file")->required();
    l1->add_option("--rhs", l1_rhs, "Right-hand side file")->required();
    l1->add_option("--meta", l1_meta, "Metadata with the optimum (default <in>.meta.json)");
    l1->add_option("--report", l1_report, "JSON-lines report (default stdout)");
    l1->add_option("--csv", l1_csv, "CSV report");

    // bench
    auto* bench = app.add_subcommand("bench", "Run an experiment plan");
    std::string bench_plan, bench_out;
    double bench_trials = 0, bench_m = 0, bench_n = 0;
    bench->add_option("--plan", bench_plan, "fig3, fig5 or fig6")->required();
    bench->add_option("--trials", bench_trials, "Trials per cell, 0 keeps the plan default");
    bench->add_option("--m", bench_m, "Override the row count");
    bench->add_option("--n", bench_n, "Override the column count");
    bench->add_option("--out", bench_out, "Report prefix (default: the plan name)");

    // report
    auto* report = app.add_subcommand("report", "Summarize a JSON-lines bench report as CSV medians");
    std::string report_in, report_csv;
    report->add_option("--in", report_in, "Bench JSON-lines file")->required();
    report->add_option("--csv", report_csv, "Output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        parallel::set_threads(g.threads ? g.threads : std::max(1u, std::thread::hardware_concurrency()));

        if (*gen) {
            const auto fam = parse_family(gen_family);
            const auto mode = parse_stack(gen_stack);
            require(fam.has_value(), ErrorCode::InvalidArgument, "unknown family '" + gen_family + "'");
            require(mode.has_value(), ErrorCode::InvalidArgument, "unknown stack mode '" + gen_stack + "'");
            const std::size_t m = as_count(gen_m, "--m");
            const std::size_t n = as_count(gen_n, "--n");
            const std::size_t repnum = as_count(gen_repnum, "--repnum");
            ProblemInstance inst = generate(*fam, m, n, gen_kappa, g.seed);
            if (gen_l1) attach_l1_optimum(inst);
            if (repnum > 1 || *mode != StackMode::none) {
                const ProblemInstance meta = write_stacked(inst, std::max<std::size_t>(repnum, 1), *mode, gen_out, gen_rhs);
                write_meta(gen_out, meta, read_header(gen_out).rows, n);
            } else {
                write_matrix(gen_out, inst.a);
                write_vector(gen_rhs, inst.b);
                write_meta(gen_out, inst, m, n);
            }
            Json j;
            j["family"] = gen_family;
            j["rows"] = read_header(gen_out).rows;
            j["cols"] = n;
            j["mass_fraction"] = inst.mass_fraction;
            std::cout << j.dump() << '\n';
        } else if (*sk) {
            RowBlockStream st = RowBlockStream::from_file(sk_in, g.block_rows);
            const SketchVariant v = variant_of(sk_variant);
            std::size_t s = as_count(sk_s, "--s");
            if (s == 0) s = embedding_dim_default(v, st.cols(), sk_eps, sk_delta, st.rows());
            CostLedger ledger;
            const DenseMatrix out = apply(SketchOperator::make(v, s, st.rows(), derive_stream(g.seed, 0)), st, &ledger);
            write_matrix(sk_out, out);
            Json j;
            j["variant"] = std::string(to_string(v));
            j["s"] = s;
            j["passes"] = ledger.passes;
            std::cout << j.dump() << '\n';
        } else if (*lev) {
            LeverageEstimate est;
            CostLedger ledger;
            if (lev_method == "exact") {
                est = exact_leverage(read_matrix(lev_in));
            } else {
                require(lev_method == "approx", ErrorCode::InvalidArgument, "--method must be exact or approx");
                RowBlockStream st = RowBlockStream::from_file(lev_in, g.block_rows);
                SketchOperator proj = default_leverage_proj(st.rows(), st.cols(), derive_stream(g.seed, 1));
                if (!lev_proj.empty() || lev_c1 > 0) {
                    const SketchVariant v = lev_proj.empty() ? proj.variant : variant_of(lev_proj);
                    const std::size_t c1 = lev_c1 > 0 ? as_count(lev_c1, "--c1") : proj.s;
                    proj = SketchOperator::make(v, c1, st.rows(), derive_stream(g.seed, 1));
                }
                const std::size_t r2 = lev_r2 > 0 ? as_count(lev_r2, "--r2") : default_r2(st.rows());
                est = approx_leverage(st, proj, r2, 0.5, &ledger, true);
            }
            if (!lev_out.empty()) write_vector(lev_out, est.scores);
            double total = 0.0, top = 0.0;
            for (double v : est.scores) {
                total += v;
                top = std::max(top, v);
            }
            Json j;
            j["method"] = lev_method;
            j["c1"] = est.c1;
            j["r2"] = est.r2;
            j["passes"] = ledger.passes;
            j["sum"] = total;
            j["coherence"] = top;
            std::cout << j.dump() << '\n';
        } else if (*pq) {
            const DenseMatrix a = read_matrix(pq_in);
            RowBlockStream st = RowBlockStream::from_matrix(a, g.block_rows);
            Preconditioner p;
            std::size_t s = as_count(pq_s, "--s");
            if (pq_kind == "lsrn") {
                p = lsrn_precond(st, pq_gamma, derive_stream(g.seed, 0));
                s = static_cast<std::size_t>(std::ceil(pq_gamma * static_cast<double>(a.cols())));
            } else {
                require(pq_kind == "qr", ErrorCode::InvalidArgument, "--kind must be qr or lsrn");
                require(s > 0, ErrorCode::InvalidArgument, "--kind qr needs --s");
                const SketchVariant v = variant_of(pq_variant);
                p = qr_precond(apply(SketchOperator::make(v, s, a.rows(), derive_stream(g.seed, 0)), st),
                               std::string(to_string(v)));
            }
            Json j;
            j["kind"] = pq_kind;
            j["variant"] = p.source;
            j["s"] = s;
            j["cond2"] = precond_quality(a, p);
            if (p.predicted_interval) j["predicted_interval"] = {p.predicted_interval->first, p.predicted_interval->second};
            std::cout << j.dump() << '\n';
        } else if (*l2) {
            const ProblemInstance inst = load_instance(l2_in, l2_rhs, l2_meta, NormKind::l2);
            l2_cfg.s = as_count(l2_s, "--s");
            l2_cfg.seed = g.seed;
            l2_cfg.block_rows = g.block_rows;
            l2_cfg.sampling_mode = parse_sampling_mode(l2_sampling);
            SolveReport rep;
            if (l2_method == "sketch") {
                const SketchVariant v = variant_of(l2_variant);
                const std::size_t m = inst.a.rows(), n = inst.a.cols();
                const std::size_t s = l2_cfg.s ? l2_cfg.s : embedding_dim_default(v, n, l2_cfg.eps, l2_cfg.delta, m);
                rep = sketch_and_solve_l2(inst, SketchOperator::make(v, s, m, derive_stream(g.seed, 0)), l2_cfg);
            } else if (l2_method == "sample-appr" || l2_method == "sample-exact" || l2_method == "sample-unif") {
                const std::size_t m = inst.a.rows(), n = inst.a.cols();
                CostLedger lev_ledger;
                Vector scores(m, 1.0);
                if (l2_method == "sample-exact") {
                    scores = exact_leverage(inst.a).scores;
                } else if (l2_method == "sample-appr") {
                    RowBlockStream st = RowBlockStream::from_matrix(inst.a, g.block_rows);
                    scores = approx_leverage(st, default_leverage_proj(m, n, derive_stream(g.seed, 1)), default_r2(m),
                                             0.5, &lev_ledger, true)
                                 .scores;
                }
                rep = sample_and_solve_l2(inst, scores, l2_method.substr(7), l2_cfg);
                rep.ledger.passes += lev_ledger.passes;
            } else if (l2_method == "lsqr") {
                const auto start = std::chrono::steady_clock::now();
                RowBlockStream st = RowBlockStream::from_matrix(inst.a, g.block_rows);
                CostLedger ledger;
                const auto [op, op_t] = stream_operators(st, &ledger);
                rep = lsqr(op, op_t, inst.b, nullptr, {l2_cfg.tol, l2_cfg.max_iters, false}, &ledger);
                rep.ledger = ledger;
                rep.seed = g.seed;
                rep.wall_ms = elapsed_ms(start);
                score_against(rep, inst);
            } else if (l2_method == "lsrn-lsqr" || l2_method == "lsrn-cs") {
                rep = lsrn_solve(inst, l2_method == "lsrn-cs" ? IterativeMethod::cs : IterativeMethod::lsqr, l2_cfg);
            } else {
                fail(ErrorCode::InvalidArgument, "unknown --method '" + l2_method + "'");
            }
            emit({rep}, l2_report, l2_csv, g.deterministic);
        } else if (*l1) {
            const ProblemInstance inst = load_instance(l1_in, l1_rhs, l1_meta, NormKind::l1);
            std::vector<SolveReport> reps;
            if (l1_exact) {
                const auto start = std::chrono::steady_clock::now();
                const L1Result res = ipm_l1(L1Subproblem::residual(inst.a, inst.b), l1_cfg.ipm_tol);
                SolveReport rep;
                rep.method = "l1-ipm";
                rep.variant = "exact";
                rep.s = inst.a.rows();
                rep.seed = g.seed;
                rep.iterations = res.iterations;
                rep.x_hat = res.x;
                rep.ledger.add_pass();
                rep.wall_ms = elapsed_ms(start);
                score_against(rep, inst);
                reps.push_back(std::move(rep));
            } else {
                l1_cfg.variant = variant_of(l1_variant);
                l1_cfg.s_condition = as_count(l1_s_cond, "--s-condition");
                l1_cfg.s = l1_s == "auto" ? 0 : as_count(std::stod(l1_s), "--s");
                l1_cfg.mapper_kappa = l1_mapper;
                l1_cfg.seed = g.seed;
                l1_cfg.block_rows = g.block_rows;
                L1Run run = solve_l1_low_precision(inst, l1_cfg, as_count(l1_queries, "--queries"));
                std::cerr << "theory s " << run.theory_s << ", used s " << run.s << '\n';
                reps = std::move(run.queries);
            }
            emit(reps, l1_report, l1_csv, g.deterministic);
        } else if (*bench) {
            ExperimentPlan plan = builtin_plan(bench_plan);
            plan.seed = g.seed;
            plan.block_rows = g.block_rows;
            if (bench_trials > 0) plan.trials = as_count(bench_trials, "--trials");
            if (bench_m > 0) plan.m = as_count(bench_m, "--m");
            if (bench_n > 0) plan.n = as_count(bench_n, "--n");
            const auto records = run_plan(plan);
            emit_report(bench_out.empty() ? plan.name : bench_out, plan.name, records, g.deterministic);
            std::size_t failed = 0;
            for (const BenchRecord& r : records) failed += r.status != "ok";
            std::cout << records.size() << " records, " << failed << " failed trials\n";
        } else if (*report) {
            std::ifstream f(report_in, std::ios::binary);
            require(static_cast<bool>(f), ErrorCode::Io, "cannot open " + report_in);
            std::stringstream text;
            text << f.rdbuf();
            const std::string csv = summary_to_csv(summarize(records_from_jsonl(text.str())), g.deterministic);
            if (report_csv.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(report_csv, std::ios::binary);
                require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + report_csv);
                out << csv;
            }
        }
    } catch (const Error& e) {
        std::cerr << "sketchreg: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "sketchreg: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
