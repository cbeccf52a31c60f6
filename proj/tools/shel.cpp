#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shel/bench.hpp"
#include "shel/synth.hpp"
#include "shel/validate.hpp"

using namespace shel;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitFailed = 1;
constexpr int kExitParse = 2;
constexpr int kExitUnsupported = 3;

struct EngineFlags {
    std::size_t max_iters = EngineConfig{}.max_iterations;
    std::size_t max_facts = EngineConfig{}.max_facts;
    std::string bound_cap = "64";
    long max_scale = 0;
    std::string rules = "default";

    void add_to(CLI::App* c) {
        c->add_option("--max-iters", max_iters, "iteration cap")->capture_default_str();
        c->add_option("--max-facts", max_facts, "fact cap")->capture_default_str();
        c->add_option("--bound-cap", bound_cap, "largest bound (eps units) a context may carry")->capture_default_str();
        c->add_option("--max-scale", max_scale, "largest push scale; 0 picks one from the program");
        c->add_option("--rules", rules, "comma-separated rule names; 'all', 'default', '-name' to drop one")
            ->capture_default_str();
    }
    EngineConfig config() const {
        EngineConfig cfg;
        cfg.max_iterations = max_iters;
        cfg.max_facts = max_facts;
        cfg.bound_cap = Bound::parse(bound_cap);
        cfg.max_scale = max_scale;
        cfg.rules = RuleSet::parse(rules);
        return cfg;
    }
};

prec_t default_precision() {
    if (const char* p = std::getenv("SHEL_PRECISION")) {
        long v = std::strtol(p, nullptr, 10);
        if (v >= 64) return static_cast<prec_t>(v);
        std::cerr << "ignoring SHEL_PRECISION=" << p << " (need an integer >= 64)\n";
    }
    return kDefaultPrecision;
}

// Argument is a file if one exists at that path, else the expression itself.
std::string read_program(const std::string& arg) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(arg, ec)) return arg;
    std::ifstream in(arg);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json bounds_json(const std::map<std::string, Bound>& b) {
    Json j = Json::object();
    for (const auto& [v, q] : b) j[v] = q.str();
    return j;
}

const char* status_of(const Analysis& a) {
    if (!a.reports.empty()) return "bounds-found";
    return a.stats.saturated ? "none-found" : "capped";
}

Json analysis_json(const std::string& program, const Analysis& a, double ms) {
    Json j;
    j["version"] = kSchemaVersion;
    j["program"] = program;
    j["status"] = status_of(a);
    Json reps = Json::array();
    for (const auto& r : a.reports) reps.push_back({{"bounds", bounds_json(r.bounds)}, {"smallest_max", r.smallest_max}});
    j["reports"] = reps;
    j["stats"] = {{"facts", a.stats.facts}, {"iterations", a.stats.iterations}, {"saturated", a.stats.saturated}};
    j["time_ms"] = ms;
    return j;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

struct Parsed {
    Expr e;
    std::string text;
};

// Exit code on failure, with the message already printed.
int parse_program(const std::string& arg, Parsed& out) {
    try {
        out.e = parse_expr(read_program(arg));
        out.text = print(out.e);
        return 0;
    } catch (const ParseError& ex) {
        std::cerr << "parse error: " << ex.what() << "\n";
        return kExitParse;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "parse error: " << ex.what() << "\n";
        return kExitParse;
    }
}

int cmd_analyze(const std::string& arg, const EngineFlags& ef, bool all, bool json, bool derivations) {
    Parsed p;
    if (int rc = parse_program(arg, p)) return rc;
    auto t0 = std::chrono::steady_clock::now();
    Analysis a;
    try {
        a = analyze(p.e, ef.config(), all);
    } catch (const UnsupportedOperator& ex) {
        std::cerr << "unsupported: " << ex.what() << "\n";
        return kExitUnsupported;
    }
    double ms = elapsed_ms(t0);
    if (json) {
        Json j = analysis_json(p.text, a, ms);
        if (derivations) {
            Json d = Json::array();
            for (const auto& r : a.reports) d.push_back(a.db.extract_derivation(r).to_text());
            j["derivations"] = d;
        }
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << "program  " << p.text << "\n";
    std::cout << "status   " << status_of(a) << "\n";
    for (const auto& r : a.reports) {
        std::cout << "bounds   " << r.str() << (r.smallest_max ? "  (smallest max)" : "") << "\n";
        if (derivations) std::cout << a.db.extract_derivation(r).to_text();
    }
    std::cout << "facts " << a.stats.facts << ", iterations " << a.stats.iterations << ", pruned " << a.stats.pruned
              << (a.stats.saturated ? ", saturated" : ", not saturated") << ", " << ms << " ms\n";
    return 0;
}

struct SampleFlags {
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
    std::string format = "binary64";
    prec_t prec = 0;
    bool positive = false;
    int lo = -30, hi = 30;
    unsigned threads = 0;

    void add_to(CLI::App* c, bool range) {
        c->add_option("--samples", samples, "samples per check")->capture_default_str();
        c->add_option("--seed", seed)->capture_default_str();
        c->add_option("--format", format, "binary64 or binary32")->capture_default_str();
        c->add_option("--precision", prec, "extended precision P in bits (default: SHEL_PRECISION or 256)");
        c->add_option("--threads", threads, "worker threads; 0 uses every core");
        if (range) {
            c->add_flag("--positive", positive, "draw positive inputs only");
            c->add_option("--lo", lo, "smallest input exponent")->capture_default_str();
            c->add_option("--hi", hi, "largest input exponent")->capture_default_str();
        }
    }
    prec_t precision() const { return prec ? prec : default_precision(); }
    RoundingModel model() const { return unit_roundoff(parse_format(format)); }
    CertifyOptions certify_options() const {
        CertifyOptions o;
        o.samples = samples;
        o.prec = precision();
        o.seed = seed;
        o.threads = threads;
        return o;
    }
};

Json stability_json(const StabilityReport& r) { return Json::parse(r.to_json()); }

void print_stability(const StabilityReport& r) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << bounds_str(r.claimed) << "  samples " << r.samples
              << ", failures " << r.failures << ", max residual 2^" << r.max_residual_log2 << "\n  observed/eps:";
    for (const auto& v : r.vars) std::cout << " " << v << "=" << r.max_ratio.at(v);
    std::cout << "\n";
    for (const auto& c : r.counterexamples) std::cout << "  " << c << "\n";
}

int cmd_certify(const std::string& arg, const EngineFlags& ef, const SampleFlags& sf, bool json) {
    Parsed p;
    if (int rc = parse_program(arg, p)) return rc;
    Analysis a;
    try {
        a = analyze(p.e, ef.config());
    } catch (const UnsupportedOperator& ex) {
        std::cerr << "unsupported: " << ex.what() << "\n";
        return kExitUnsupported;
    }
    RoundingModel m = sf.model();
    Sampler s = log_uniform_sampler(sf.positive, sf.lo, sf.hi);
    bool ok = true;
    Json out = Json::array();
    for (const auto& r : a.reports) {
        StabilityReport sr = certify(p.e, r, a.db.extract_derivation(r), m, s, sf.certify_options());
        sr.program = p.text;
        ok = ok && sr.passed();
        if (json) out.push_back(stability_json(sr));
        else print_stability(sr);
    }
    if (json) std::cout << Json{{"version", kSchemaVersion}, {"program", p.text}, {"status", status_of(a)},
                               {"certified", out}}.dump(2)
                        << "\n";
    else if (a.reports.empty()) std::cout << "no bounds found (" << status_of(a) << ")\n";
    return ok ? 0 : kExitFailed;
}

int cmd_bench(const std::string& suite, const EngineFlags& ef, double timeout, bool full, bool json,
              const SampleFlags& sf) {
    std::vector<BenchRow> rows;
    if (suite == "table1" || suite == "all")
        for (auto& r : table1_rows())
            if (full || r.desk) rows.push_back(r);
    if (suite == "table2" || suite == "all")
        for (auto& r : table2_rows()) rows.push_back(r);
    bool ok = true;
    Json out = Json::array();
    for (const auto& row : rows) {
        BenchResult r = run_bench_row(row, ef.config(), timeout);
        ok = ok && r.status != BenchStatus::Fail;
        if (json) {
            Json reps = Json::array();
            for (const auto& b : r.reports) reps.push_back({{"bounds", bounds_json(b.bounds)}, {"smallest_max", b.smallest_max}});
            out.push_back({{"name", row.name},
                           {"program", print(row.program)},
                           {"expected_max", row.expected_max.str()},
                           {"found_max", r.found_max ? Json(r.found_max->str()) : Json(nullptr)},
                           {"status", bench_status_name(r.status)},
                           {"reports", reps},
                           {"time_ms", r.time_ms},
                           {"note", r.note}});
            continue;
        }
        std::printf("%-8s %-12s expected %-5s found %-5s %8.1f ms  %s\n", bench_status_name(r.status), row.name.c_str(),
                    row.expected_max.str().c_str(), r.found_max ? r.found_max->str().c_str() : "-", r.time_ms,
                    r.note.c_str());
    }
    if (suite == "case-studies" || suite == "all") {
        RoundingModel m = sf.model();
        for (const auto& c : case_study_pipelines()) {
            std::map<std::string, Bound> got;
            const auto& b = c.lens.source().bounds();
            for (std::size_t i = 0; i < c.vars.size(); ++i) got[c.vars[i]] = b[i];
            StabilityReport sr = certify_lens(c.program, c.lens, c.vars, c.expected, m, c.sampler, sf.certify_options());
            bool pass = got == c.expected && sr.passed();
            ok = ok && pass;
            if (json) {
                out.push_back({{"name", c.name},
                               {"program", print(c.program)},
                               {"expected", bounds_json(c.expected)},
                               {"source_bounds", bounds_json(got)},
                               {"status", pass ? "pass" : "fail"},
                               {"certified", stability_json(sr)}});
                continue;
            }
            std::printf("%-8s %-24s %s  certified %zu samples\n", pass ? "pass" : "fail", c.name.c_str(),
                        bounds_str(got).c_str(), sr.samples);
        }
    }
    if (json) std::cout << Json{{"version", kSchemaVersion}, {"suite", suite}, {"rows", out}}.dump(2) << "\n";
    return ok ? 0 : kExitFailed;
}

int cmd_lenscheck(const SampleFlags& sf, bool json) {
    RoundingModel m = sf.model();
    bool ok = true;
    Json out = Json::array();
    for (const auto& c : lens_catalog(m)) {
        CheckReport r = check_conditions(c.lens, sf.samples, m, sf.precision(), c.sampler, sf.seed);
        ok = ok && r.passed();
        if (json) {
            out.push_back({{"lens", c.id},
                           {"source", c.lens.source().str()},
                           {"target", c.lens.target().str()},
                           {"samples", r.samples},
                           {"failures", r.failures},
                           {"max_residual_log2", r.max_residual_log2},
                           {"max_norm_ratio", r.max_norm_ratio},
                           {"counterexample", r.counterexample}});
            continue;
        }
        std::printf("%s %-36s %zu samples, residual 2^%.1f, norm ratio %.3f %s\n", r.passed() ? "PASS" : "FAIL",
                    c.id.c_str(), r.samples, r.max_residual_log2, r.max_norm_ratio, r.counterexample.c_str());
    }
    if (json) std::cout << Json{{"version", kSchemaVersion}, {"lenses", out}}.dump(2) << "\n";
    return ok ? 0 : kExitFailed;
}

int cmd_audit(const SampleFlags& sf, bool json) {
    RoundingModel m = sf.model();
    bool ok = true;
    Json out = Json::array();
    for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt}) {
        AuditReport r = audit_rounding(op, sf.samples, m, sf.precision(), sf.seed, sf.threads);
        ok = ok && r.passed();
        if (json) {
            out.push_back({{"op", op_name(op)},
                           {"samples", r.samples},
                           {"violations", r.violations},
                           {"max_delta_over_eps", r.max_delta_over_eps}});
            continue;
        }
        std::printf("%s %-4s %zu samples, %zu violations, max |delta|/eps %.6f %s\n", r.passed() ? "PASS" : "FAIL",
                    op_name(op), r.samples, r.violations, r.max_delta_over_eps, r.worst.c_str());
    }
    if (json) std::cout << Json{{"version", kSchemaVersion}, {"format", sf.format}, {"ops", out}}.dump(2) << "\n";
    return ok ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backward error bounds for floating-point expressions"};
    app.require_subcommand(1);
    bool json = false;
    app.add_flag("--json", json, "machine-readable output");

    EngineFlags ef;
    SampleFlags sf;

    auto* an = app.add_subcommand("analyze", "synthesize per-variable backward error bounds");
    std::string program;
    bool all = false, derivations = false;
    an->add_option("program", program, "s-expression or file containing one")->required();
    an->add_flag("--all-bounds", all, "report every start context found, not only Pareto-minimal ones");
    an->add_flag("--derivations", derivations, "print the rule chain behind each report");
    an->add_flag("--json", json, "machine-readable output");
    ef.add_to(an);

    auto* ce = app.add_subcommand("certify", "check synthesized bounds on sampled inputs");
    ce->add_option("program", program, "s-expression or file containing one")->required();
    ce->add_flag("--json", json, "machine-readable output");
    ef.add_to(ce);
    sf.add_to(ce, true);

    auto* be = app.add_subcommand("bench", "reproduce the benchmark tables and case studies");
    std::string suite = "all";
    double timeout = 120;
    bool full = false;
    be->add_option("--suite", suite, "table1, table2, case-studies or all")
        ->check(CLI::IsMember({"table1", "table2", "case-studies", "all"}))
        ->capture_default_str();
    be->add_option("--timeout", timeout, "per-row time limit in seconds")->capture_default_str();
    be->add_flag("--full", full, "include table1 rows beyond desk scale");
    be->add_flag("--json", json, "machine-readable output");
    ef.add_to(be);
    sf.add_to(be, false);

    auto* lc = app.add_subcommand("lenscheck", "check both lens conditions across the catalog");
    lc->add_flag("--json", json, "machine-readable output");
    sf.add_to(lc, false);

    auto* au = app.add_subcommand("audit", "measure single-rounding errors against eps");
    au->add_flag("--json", json, "machine-readable output");
    sf.add_to(au, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitParse;
    }

    try {
        if (*an) return cmd_analyze(program, ef, all, json, derivations);
        if (*ce) return cmd_certify(program, ef, sf, json);
        if (*be) return cmd_bench(suite, ef, timeout, full, json, sf);
        if (*lc) return cmd_lenscheck(sf, json);
        if (*au) return cmd_audit(sf, json);
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitParse;
    }
    return 0;
}
