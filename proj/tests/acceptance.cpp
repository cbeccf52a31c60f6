// One PASS/FAIL line per acceptance criterion. Tolerances are pinned below.

#include <array>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "shel/bench.hpp"
#include "shel/validate.hpp"

using namespace shel;

namespace {

constexpr prec_t kPrec = 256;
constexpr long kResidualLog2 = -128;         // lens exactness residual, 2^-(P/2)
constexpr long kSlackLog2 = -240;            // certify bound slack, 2^-(P-16)
constexpr double kTable2Seconds = 5.0;       // per program
constexpr double kTable1Timeout = 120.0;     // per row
constexpr std::size_t kLensSamples = 1000;
constexpr std::size_t kCertifySamples = 1000;
constexpr std::size_t kAuditSamples = 1'000'000;
constexpr std::size_t kOracleSamples = 1000;
constexpr double kAuditMaxRatio = 1.0;       // |delta| / eps

#ifndef SHEL_CLI_PATH
#define SHEL_CLI_PATH "shel"
#endif

const RoundingModel& b64() {
    static const RoundingModel m = unit_roundoff(Format::Binary64);
    return m;
}

int failures = 0;

void verdict(int n, bool ok, const std::string& what) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what << std::endl;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CertifyOptions cert_opts() {
    CertifyOptions o;
    o.samples = kCertifySamples;
    o.prec = kPrec;
    o.seed = 2024;
    return o;
}

void criterion1() {
    bool ok = true;
    std::ostringstream note;
    int passed = 0;
    for (const auto& row : table2_rows()) {
        auto t0 = std::chrono::steady_clock::now();
        BenchResult r = run_bench_row(row, {}, kTable1Timeout);
        double s = seconds_since(t0);
        bool good = r.status == BenchStatus::Pass && s < kTable2Seconds;
        if (good) ++passed;
        else note << " " << row.name << "(" << bench_status_name(r.status) << ", " << s << "s)";
        ok = ok && good;
    }
    verdict(1, ok, "table2 " + std::to_string(passed) + "/8 exact within 5s" + note.str());
}

void criterion2() {
    bool ok = true;
    int passed = 0, total = 0;
    std::ostringstream note;
    for (const auto& row : table1_rows()) {
        if (!row.desk) continue;
        ++total;
        BenchResult r = run_bench_row(row, {}, kTable1Timeout);
        if (r.status == BenchStatus::Pass) {
            ++passed;
        } else {
            ok = false;
            note << " " << row.name << " expected " << row.expected_max.str() << " got "
                 << (r.found_max ? r.found_max->str() : "-") << " (" << bench_status_name(r.status) << ")";
        }
    }
    verdict(2, ok, "table1 desk rows " + std::to_string(passed) + "/" + std::to_string(total) + note.str());
}

void criterion3() {
    bool ok = true;
    std::ostringstream note;
    for (const auto& c : case_study_pipelines()) {
        const auto src = c.lens.source().bounds();
        bool good = src.size() == c.vars.size();
        for (std::size_t i = 0; good && i < src.size(); ++i) good = src[i] == c.expected.at(c.vars[i]);
        CheckReport chk = check_conditions(c.lens, kLensSamples, b64(), kPrec, c.sampler, 31);
        good = good && chk.passed();
        if (!good) note << " " << c.name;
        ok = ok && good;
    }
    verdict(3, ok, "case-study bounds exact" + note.str());
}

void criterion4() {
    bool ok = true;
    std::size_t n = 0;
    std::ostringstream note;
    for (const auto& c : lens_catalog(b64())) {
        CheckReport r = check_conditions(c.lens, kLensSamples, b64(), kPrec, c.sampler, 41);
        bool good = r.passed() && r.samples == kLensSamples && r.max_residual_log2 <= kResidualLog2;
        if (!good) note << " " << c.id << ": " << r.counterexample;
        ok = ok && good;
        ++n;
    }
    verdict(4, ok, "lens catalog (" + std::to_string(n) + " lenses) both conditions at P=256" + note.str());
}

void criterion5() {
    bool ok = true;
    std::size_t programs = 0, reports = 0;
    std::ostringstream note;
    auto run = [&](const std::string& name, const Expr& e, const Sampler& s) {
        Analysis a = analyze(e);
        ++programs;
        if (a.reports.empty()) {
            ok = false;
            note << " " << name << "(no bounds)";
            return;
        }
        for (const auto& rep : certify_all(a, b64(), s, cert_opts())) {
            ++reports;
            bool good = rep.passed() && rep.samples >= kCertifySamples && rep.max_residual_log2 <= kResidualLog2;
            if (!good) note << " " << name;
            ok = ok && good;
        }
    };
    for (const auto& row : table2_rows()) run(row.name, row.program, log_uniform_sampler(true));
    for (const auto& row : table1_rows())
        if (row.desk) run(row.name, row.program, log_uniform_sampler());
    for (const auto& c : case_study_pipelines()) {
        ++programs;
        ++reports;
        StabilityReport rep = certify_lens(c.program, c.lens, c.vars, c.expected, b64(), c.sampler, cert_opts());
        if (!rep.passed()) note << " " << c.name;
        ok = ok && rep.passed();
    }
    std::ostringstream what;
    what << "certified " << reports << " bound reports over " << programs << " programs, " << kCertifySamples
         << " samples each, slack 2^" << kSlackLog2 << note.str();
    verdict(5, ok, what.str());
}

void criterion6() {
    bool ok = true;
    std::ostringstream what;
    what << "rounding audit, " << kAuditSamples << " samples per op:";
    for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt}) {
        AuditReport r = audit_rounding(op, kAuditSamples, b64(), kPrec, 6, 0);
        bool good = r.passed() && r.samples >= kAuditSamples && r.max_delta_over_eps <= kAuditMaxRatio;
        what << " " << op_name(op) << " max " << r.max_delta_over_eps << "eps";
        if (!good) what << " [" << r.violations << " violations: " << r.worst << "]";
        ok = ok && good;
    }
    verdict(6, ok, what.str());
}

void criterion7() {
    Expr e = parse_expr("(Add (Mul x1 y1) (Mul x2 y2))");
    Analysis a = analyze(e);
    const BoundReport* ones = nullptr;
    for (const auto& r : a.reports) {
        bool all = true;
        for (const auto& [v, b] : r.bounds) all = all && b == Bound(1);
        if (all) ones = &r;
    }
    if (!ones) {
        verdict(7, false, "no (1,1,1,1) report for the two-term dot product");
        return;
    }
    Derivation d = a.db.extract_derivation(*ones);
    LensSpec lens = derivation_to_lens(d);
    std::vector<std::string> order;
    for (const auto& x : value_labels(d.start)) order.push_back(x.name());

    const ExtReal eps = eps_value(b64(), kPrec);
    const ExtReal limit = eps + ExtReal::pow2(kSlackLog2, kPrec);
    const ExtReal tol = ExtReal::pow2(kResidualLog2, kPrec);
    Sampler s = log_uniform_sampler();
    std::mt19937_64 rng(77);
    std::size_t checked = 0, bad_oracle = 0, bad_lens = 0;
    double max_gap = 0;
    while (checked < kOracleSamples) {
        std::vector<double> in = s(lens.source(), rng);
        Valuation v;
        for (std::size_t i = 0; i < order.size(); ++i) v[order[i]] = in[i];
        FloatEval fe;
        try {
            fe = eval_float(e, v, b64(), kPrec);
        } catch (const EvalError&) {
            continue;
        }
        ++checked;
        ExtReal out(fe.value, kPrec);

        auto ow = oracle_dotprod(v["x1"], v["x2"], v["y1"], v["y2"], b64(), kPrec);
        RealValuation orv{{"x1", ow[0]}, {"x2", ow[1]}, {"y1", ow[2]}, {"y2", ow[3]}};
        bool o_ok = rp_distance(eval_real(e, orv, kPrec), out) <= tol;
        for (const auto& [name, w] : orv) o_ok = o_ok && rp_distance(ExtReal(v[name], kPrec), w) <= limit;

        LensInstance li = shel::bind(lens, in, b64(), kPrec);
        auto lw = li.witness();
        RealValuation lrv;
        for (std::size_t i = 0; i < order.size(); ++i) lrv.emplace(order[i], lw[i]);
        bool l_ok = li.outputs().at(0) == fe.value && rp_distance(eval_real(e, lrv, kPrec), out) <= tol;
        for (const auto& [name, w] : lrv) l_ok = l_ok && rp_distance(ExtReal(v[name], kPrec), w) <= limit;

        for (const auto& [name, w] : orv) {
            double gap = rp_distance(w, lrv.at(name)).to_double() / eps.to_double();
            max_gap = std::max(max_gap, gap);
        }
        bad_oracle += !o_ok;
        bad_lens += !l_ok;
    }
    std::ostringstream what;
    what << "dot product witnesses on " << checked << " samples: oracle failures " << bad_oracle
         << ", derivation failures " << bad_lens << ", max oracle/derivation gap " << max_gap << "eps";
    verdict(7, bad_oracle == 0 && bad_lens == 0, what.str());
}

std::string run_cli(const std::string& program) {
    std::string cmd = std::string(SHEL_CLI_PATH) + " --json analyze '" + program + "'";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) return {};
    std::string out;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), n);
    return out;
}

void criterion8() {
    bool ok = true;
    std::size_t n = 0;
    std::ostringstream note;
    std::vector<std::string> programs;
    for (const auto& row : table2_rows()) programs.push_back(print(row.program));
    programs.push_back(print(gen_norm(3)));
    programs.push_back(print(gen_dotprod(4)));
    for (const auto& p : programs) {
        nlohmann::json a, b;
        try {
            a = nlohmann::json::parse(run_cli(p));
            b = nlohmann::json::parse(run_cli(p));
        } catch (const std::exception& ex) {
            ok = false;
            note << " " << p << ": " << ex.what();
            continue;
        }
        a.erase("time_ms");
        b.erase("time_ms");
        if (a != b || a.value("status", "") != "bounds-found") {
            ok = false;
            note << " " << p;
        }
        ++n;
    }
    verdict(8, ok, "analyze output identical across two runs for " + std::to_string(n) + " programs" + note.str());
}

}  // namespace

int main() {
    auto t0 = std::chrono::steady_clock::now();
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    std::cout << failures << " of 8 criteria failed (" << seconds_since(t0) << "s)" << std::endl;
    return failures == 0 ? 0 : 1;
}
