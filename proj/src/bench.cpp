#include "sketchreg/bench.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/leverage.hpp"
#include "sketchreg/random.hpp"
#include "sketchreg/sketch.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace sketchreg {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kInstanceStream = 0x1a57;

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> opt_from(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

std::optional<double> median_opt(const std::vector<std::optional<double>>& v) {
    std::vector<double> x;
    for (const auto& e : v)
        if (e) x.push_back(*e);
    if (x.empty()) return std::nullopt;
    return median_of(std::move(x));
}

SketchVariant projection_variant(Method m) {
    switch (m) {
    case Method::proj_cw: return SketchVariant::countsketch;
    case Method::proj_gaussian: return SketchVariant::gaussian;
    case Method::proj_rademacher: return SketchVariant::rademacher;
    case Method::proj_srdht: return SketchVariant::srdht;
    default: break;
    }
    fail(ErrorCode::InvalidArgument, "not a projection method");
}

std::string_view panel_name(Sweep s) {
    switch (s) {
    case Sweep::embedding_dim: return "error-vs-s";
    case Sweep::rows: return "error-vs-m";
    case Sweep::cols: return "error-vs-n";
    }
    return "error-vs-s";
}

} // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::proj_cw: return "proj-cw";
    case Method::proj_gaussian: return "proj-gaussian";
    case Method::proj_rademacher: return "proj-rademacher";
    case Method::proj_srdht: return "proj-srdht";
    case Method::samp_appr: return "samp-appr";
    case Method::samp_unif: return "samp-unif";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view s) noexcept {
    for (Method m : {Method::proj_cw, Method::proj_gaussian, Method::proj_rademacher, Method::proj_srdht,
                     Method::samp_appr, Method::samp_unif})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::string_view to_string(Sweep s) noexcept {
    switch (s) {
    case Sweep::embedding_dim: return "s";
    case Sweep::rows: return "m";
    case Sweep::cols: return "n";
    }
    return "s";
}

std::optional<Sweep> parse_sweep(std::string_view s) noexcept {
    for (Sweep w : {Sweep::embedding_dim, Sweep::rows, Sweep::cols})
        if (to_string(w) == s) return w;
    return std::nullopt;
}

ExperimentPlan builtin_plan(std::string_view name) {
    ExperimentPlan p;
    p.name = std::string(name);
    const std::vector<Method> all{Method::proj_cw,    Method::proj_gaussian, Method::proj_rademacher,
                                  Method::proj_srdht, Method::samp_appr,     Method::samp_unif};
    if (name == "fig3") {
        p.sweep = Sweep::embedding_dim;
        p.families = {Family::UG, Family::UB, Family::NG, Family::NB};
        p.methods = all;
        p.m = 10000;
        p.n = 50;
        p.s_grid = {10, 20, 50};
        p.s_per_n = true;
    } else if (name == "fig5") {
        p.sweep = Sweep::rows;
        p.families = {Family::NB};
        p.methods = {Method::proj_cw, Method::proj_gaussian, Method::proj_rademacher, Method::proj_srdht};
        p.m = 2000;
        p.n = 20;
        p.s_grid = {1000};
        p.repnum_grid = {1, 2, 5, 10};
    } else if (name == "fig6") {
        p.sweep = Sweep::cols;
        p.families = {Family::NB};
        p.methods = {Method::proj_cw, Method::proj_gaussian, Method::samp_appr};
        p.m = 10000;
        p.s_grid = {2000};
        p.n_grid = {10, 20, 50, 100};
    } else {
        fail(ErrorCode::InvalidArgument, "unknown plan '" + std::string(name) + "'; expected fig3, fig5 or fig6");
    }
    return p;
}

BenchRecord run_trial(const ProblemInstance& inst, Method method, std::size_t s, std::uint64_t seed,
                      std::size_t block_rows) {
    BenchRecord rec;
    rec.family = std::string(to_string(inst.family));
    rec.method = std::string(to_string(method));
    rec.m = inst.a.rows();
    rec.n = inst.a.cols();
    rec.s = s;
    rec.seed = seed;
    const auto start = Clock::now();
    try {
        SolverConfig cfg;
        cfg.s = s;
        cfg.seed = seed;
        cfg.block_rows = block_rows;
        SolveReport rep;
        if (method == Method::samp_appr || method == Method::samp_unif) {
            CostLedger lev_ledger;
            Vector scores(rec.m, 1.0);
            if (method == Method::samp_appr) {
                RowBlockStream st = RowBlockStream::from_matrix(inst.a, block_rows);
                const SketchOperator proj = default_leverage_proj(rec.m, rec.n, derive_stream(seed, 1));
                scores = approx_leverage(st, proj, default_r2(rec.m), 0.5, &lev_ledger, true).scores;
            }
            rep = sample_and_solve_l2(inst, scores, rec.method, cfg);
            rep.ledger.passes += lev_ledger.passes;
            rep.ledger.reductions += lev_ledger.reductions;
        } else {
            const SketchOperator op = SketchOperator::make(projection_variant(method), s, rec.m, derive_stream(seed, 0));
            rep = sketch_and_solve_l2(inst, op, cfg);
        }
        rec.rel_err_f = rep.rel_err_f;
        rec.rel_err_x = rep.rel_err_x;
        rec.passes = rep.ledger.passes;
        rec.reductions = rep.ledger.reductions;
    } catch (const Error& e) {
        rec.status = to_string(e.code());
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return rec;
}

std::vector<BenchRecord> run_plan(const ExperimentPlan& plan) {
    require(plan.trials >= 1, ErrorCode::InvalidArgument, "plan needs at least one trial");
    require(!plan.s_grid.empty(), ErrorCode::InvalidArgument, "plan needs an embedding dimension");
    std::vector<BenchRecord> out;
    std::uint64_t cell = 0;
    const auto s_for = [&](std::size_t value, std::size_t n) { return plan.s_per_n ? value * n : value; };
    const auto run_cells = [&](const ProblemInstance& inst, const std::vector<std::size_t>& s_values) {
        for (std::size_t s : s_values)
            for (Method method : plan.methods) {
                const SeedSpec cell_seed = derive_stream(plan.seed, cell++);
                for (std::size_t t = 0; t < plan.trials; ++t) {
                    BenchRecord rec = run_trial(inst, method, s, derive_stream(cell_seed, t).key(), plan.block_rows);
                    rec.plan = plan.name;
                    rec.panel = std::string(panel_name(plan.sweep));
                    rec.trial = t;
                    out.push_back(std::move(rec));
                }
            }
    };
    for (std::size_t fi = 0; fi < plan.families.size(); ++fi) {
        const std::uint64_t inst_seed = derive_stream(plan.seed, kInstanceStream + fi).key();
        switch (plan.sweep) {
        case Sweep::embedding_dim: {
            const ProblemInstance inst = generate(plan.families[fi], plan.m, plan.n, plan.kappa, inst_seed);
            std::vector<std::size_t> s_values;
            for (std::size_t v : plan.s_grid) s_values.push_back(s_for(v, plan.n));
            run_cells(inst, s_values);
            break;
        }
        case Sweep::rows: {
            const ProblemInstance base = generate(plan.families[fi], plan.m, plan.n, plan.kappa, inst_seed);
            for (std::size_t rep : plan.repnum_grid)
                run_cells(rep == 1 ? base : stack(base, rep, StackMode::stack1), {s_for(plan.s_grid.front(), plan.n)});
            break;
        }
        case Sweep::cols:
            for (std::size_t n : plan.n_grid)
                run_cells(generate(plan.families[fi], plan.m, n, plan.kappa, inst_seed), {s_for(plan.s_grid.front(), n)});
            break;
        }
    }
    return out;
}

std::vector<CellSummary> summarize(const std::vector<BenchRecord>& records) {
    using Key = std::tuple<std::string, std::string, std::string, std::string, std::size_t, std::size_t, std::size_t>;
    std::map<Key, std::size_t> index;
    std::vector<CellSummary> cells;
    std::vector<std::vector<const BenchRecord*>> members;
    for (const BenchRecord& r : records) {
        const Key key{r.plan, r.panel, r.family, r.method, r.m, r.n, r.s};
        auto [it, fresh] = index.try_emplace(key, cells.size());
        if (fresh) {
            CellSummary c;
            c.plan = r.plan;
            c.panel = r.panel;
            c.family = r.family;
            c.method = r.method;
            c.m = r.m;
            c.n = r.n;
            c.s = r.s;
            cells.push_back(c);
            members.emplace_back();
        }
        members[it->second].push_back(&r);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<std::optional<double>> ef, ex;
        std::vector<double> wall, passes, reductions;
        for (const BenchRecord* r : members[c]) {
            ++cells[c].trials;
            if (r->status != "ok") {
                ++cells[c].failures;
                continue;
            }
            ef.push_back(r->rel_err_f);
            ex.push_back(r->rel_err_x);
            wall.push_back(r->wall_ms);
            passes.push_back(static_cast<double>(r->passes));
            reductions.push_back(static_cast<double>(r->reductions));
        }
        cells[c].rel_err_f = median_opt(ef);
        cells[c].rel_err_x = median_opt(ex);
        if (!wall.empty()) {
            cells[c].wall_ms = median_of(wall);
            cells[c].passes = median_of(passes);
            cells[c].reductions = median_of(reductions);
        }
    }
    return cells;
}

const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{"plan",    "panel",     "family",    "method",  "m",
                                               "n",       "s",         "trials",    "failures", "rel_err_f",
                                               "rel_err_x", "wall_ms", "passes",    "reductions"};
    return cols;
}

std::string records_to_jsonl(const std::string& plan, const std::vector<BenchRecord>& records, bool deterministic) {
    std::ostringstream out;
    Json header;
    header["schema"] = kReportSchema;
    header["plan"] = plan;
    header["records"] = records.size();
    out << header.dump() << '\n';
    for (const BenchRecord& r : records) {
        Json j;
        j["plan"] = r.plan;
        j["panel"] = r.panel;
        j["family"] = r.family;
        j["method"] = r.method;
        j["m"] = r.m;
        j["n"] = r.n;
        j["s"] = r.s;
        j["trial"] = r.trial;
        j["seed"] = r.seed;
        j["status"] = r.status;
        j["rel_err_f"] = opt_json(r.rel_err_f);
        j["rel_err_x"] = opt_json(r.rel_err_x);
        j["wall_ms"] = deterministic ? 0.0 : r.wall_ms;
        j["passes"] = r.passes;
        j["reductions"] = r.reductions;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<BenchRecord> records_from_jsonl(const std::string& text) {
    std::vector<BenchRecord> out;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::Format, std::string("bad report line: ") + e.what());
        }
        if (header) {
            require(j.value("schema", "") == kReportSchema, ErrorCode::Format, "unknown report schema");
            header = false;
            continue;
        }
        try {
            BenchRecord r;
            r.plan = j.at("plan").get<std::string>();
            r.panel = j.at("panel").get<std::string>();
            r.family = j.at("family").get<std::string>();
            r.method = j.at("method").get<std::string>();
            r.m = j.at("m").get<std::size_t>();
            r.n = j.at("n").get<std::size_t>();
            r.s = j.at("s").get<std::size_t>();
            r.trial = j.at("trial").get<std::size_t>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.status = j.at("status").get<std::string>();
            r.rel_err_f = opt_from(j.at("rel_err_f"));
            r.rel_err_x = opt_from(j.at("rel_err_x"));
            r.wall_ms = j.at("wall_ms").get<double>();
            r.passes = j.at("passes").get<std::uint64_t>();
            r.reductions = j.at("reductions").get<std::uint64_t>();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::Format, std::string("bad report record: ") + e.what());
        }
    }
    require(!header, ErrorCode::Format, "report has no header record");
    return out;
}

std::string summary_to_csv(const std::vector<CellSummary>& cells, bool deterministic) {
    std::ostringstream out;
    const auto& cols = summary_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const CellSummary& c : cells) {
        out << c.plan << ',' << c.panel << ',' << c.family << ',' << c.method << ',' << c.m << ',' << c.n << ','
            << c.s << ',' << c.trials << ',' << c.failures << ',' << opt_num(c.rel_err_f) << ','
            << opt_num(c.rel_err_x) << ',' << num(deterministic ? 0.0 : c.wall_ms) << ',' << num(c.passes) << ','
            << num(c.reductions) << '\n';
    }
    return out.str();
}

void emit_report(const std::string& prefix, const std::string& plan, const std::vector<BenchRecord>& records,
                 bool deterministic) {
    const auto write = [](const std::string& path, const std::string& body) {
        std::ofstream f(path, std::ios::binary);
        require(static_cast<bool>(f), ErrorCode::Io, "cannot open " + path);
        f << body;
        require(static_cast<bool>(f), ErrorCode::Io, "write failed for " + path);
    };
    write(prefix + ".jsonl", records_to_jsonl(plan, records, deterministic));
    write(prefix + ".csv", summary_to_csv(summarize(records), deterministic));
}

std::string solve_report_json(const SolveReport& rep, bool deterministic) {
    Json j;
    j["method"] = rep.method;
    j["variant"] = rep.variant;
    j["s"] = rep.s;
    j["seed"] = rep.seed;
    j["iters"] = rep.iterations;
    j["passes"] = rep.ledger.passes;
    j["reductions"] = rep.ledger.reductions;
    j["rel_err_f"] = opt_json(rep.rel_err_f);
    j["rel_err_x"] = opt_json(rep.rel_err_x);
    j["wall_ms"] = deterministic ? 0.0 : rep.wall_ms;
    return j.dump();
}

std::string solve_report_csv_header() { return "method,variant,s,seed,iters,passes,reductions,rel_err_f,rel_err_x,wall_ms"; }

std::string solve_report_csv_row(const SolveReport& rep, bool deterministic) {
    std::ostringstream out;
    out << rep.method << ',' << rep.variant << ',' << rep.s << ',' << rep.seed << ',' << rep.iterations << ','
        << rep.ledger.passes << ',' << rep.ledger.reductions << ',' << opt_num(rep.rel_err_f) << ','
        << opt_num(rep.rel_err_x) << ',' << num(deterministic ? 0.0 : rep.wall_ms);
    return out.str();
}

} // namespace sketchreg
