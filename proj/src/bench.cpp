#include "shel/bench.hpp"

#include <chrono>

namespace shel {

namespace {

Expr var(const std::string& prefix, int i) { return Expr::var(prefix + std::to_string(i)); }

Expr left_sum(const std::vector<Expr>& terms) {
    Expr acc = terms.at(0);
    for (std::size_t i = 1; i < terms.size(); ++i) acc = Expr::add(acc, terms[i]);
    return acc;
}

}  // namespace

Expr gen_sum(int n) {
    std::vector<Expr> t;
    for (int i = 1; i <= n; ++i) t.push_back(var("x", i));
    return left_sum(t);
}

Expr gen_linear(int v) {
    Expr x = Expr::var("x");
    std::vector<Expr> t;
    for (int i = 1; i < v; ++i) t.push_back(Expr::mul(var("a", i), x));
    return Expr::add(x, left_sum(t));
}

Expr gen_norm(int v) {
    std::vector<Expr> t;
    for (int i = 1; i <= v; ++i) t.push_back(Expr::mul(var("x", i), var("x", i)));
    return Expr::sqrt(left_sum(t));
}

Expr gen_quad(int v) {
    Expr x = Expr::var("x");
    std::vector<Expr> t;
    for (int i = 1; i < v; ++i) t.push_back(Expr::mul(Expr::mul(var("a", i), x), x));
    return Expr::add(x, left_sum(t));
}

Expr gen_dotprod(int v) {
    std::vector<Expr> t;
    for (int i = 1; i <= v / 2; ++i) t.push_back(Expr::mul(var("x", i), var("y", i)));
    return left_sum(t);
}

std::vector<BenchRow> table1_rows() {
    std::vector<BenchRow> rows;
    auto add = [&](const char* fam, int size, Expr e, Bound err, bool desk) {
        rows.push_back({"table1", std::string(fam) + "/" + std::to_string(size), std::move(e), std::move(err), {}, desk});
    };
    // 6..9 are not published rows; the desk range runs 5..10 without gaps
    for (int n = 5; n <= 14; ++n) add("sum", n, gen_sum(n), n - 1, n <= 10);
    for (int v = 2; v <= 7; ++v) add("linear", v, gen_linear(v), v - 1, v <= 5);
    for (int v = 1; v <= 7; ++v) add("norm", v, gen_norm(v), Bound(v + 2, 2), v <= 5);
    for (int v = 2; v <= 5; ++v) add("quad", v, gen_quad(v), v + 1, v <= 4);
    add("dotprod", 4, gen_dotprod(4), 1, true);
    add("dotprod", 6, gen_dotprod(6), 2, true);
    add("dotprod", 8, gen_dotprod(8), 2, false);
    return rows;
}

std::vector<BenchRow> table2_rows() {
    using B = std::map<std::string, Bound>;
    struct P {
        const char* text;
        Bound err;
        B bounds;
    };
    const std::vector<P> ps = {
        {"(Add x (Add (Mul a x) (Mul (Mul b x) x)))", 4, {{"a", 2}, {"b", 4}, {"x", 1}}},
        {"(Add a (Sqrt (Mul a b)))", 4, {{"a", 1}, {"b", 4}}},
        {"(Mul (Add a b) (Add b a))", Bound(3, 2), {{"a", Bound(3, 2)}, {"b", Bound(3, 2)}}},
        {"(Mul (Add a (Mul a b)) (Add c (Mul c d)))", Bound(3, 2),
         {{"a", Bound(3, 2)}, {"b", 1}, {"c", Bound(3, 2)}, {"d", 1}}},
        {"(Add a (Mul a (Sqrt b)))", 4, {{"a", 1}, {"b", 4}}},
        {"(Sqrt (Add (Mul a x) (Sqrt b)))", 8, {{"a", 0}, {"b", 8}, {"x", 4}}},
        {"(Mul (Add a (Sqrt b)) (Add a (Sqrt b)))", 5, {{"a", Bound(3, 2)}, {"b", 5}}},
        {"(Mul (Sqrt a) (Sqrt b))", 3, {{"a", 3}, {"b", 3}}},
    };
    std::vector<BenchRow> rows;
    for (std::size_t i = 0; i < ps.size(); ++i)
        rows.push_back({"table2", "table2/" + std::to_string(i + 1), parse_expr(ps[i].text), ps[i].err, ps[i].bounds, true});
    return rows;
}

const char* bench_status_name(BenchStatus s) {
    switch (s) {
    case BenchStatus::Pass: return "pass";
    case BenchStatus::Fail: return "fail";
    case BenchStatus::Skipped: return "skipped";
    }
    return "?";
}

std::string bounds_str(const std::map<std::string, Bound>& b) { return BoundReport{b, 0, false}.str(); }

BenchResult run_bench_row(const BenchRow& row, EngineConfig cfg, double timeout_s) {
    BenchResult res;
    res.row = row;
    cfg.time_limit_s = timeout_s;
    auto t0 = std::chrono::steady_clock::now();
    Analysis a = analyze(row.program, cfg);
    res.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.stats = a.stats;
    res.reports = a.reports;
    if (a.stats.timed_out) {
        res.status = BenchStatus::Skipped;
        res.note = "time limit reached before saturation";
        return res;
    }
    for (const auto& r : a.reports)
        if (r.smallest_max) res.found_max = r.max_bound();
    if (!res.found_max) {
        res.note = "no bounds found";
        return res;
    }
    bool ok = *res.found_max == row.expected_max;
    if (!ok) res.note = "smallest max " + res.found_max->str() + ", expected " + row.expected_max.str();
    if (row.expected) {
        bool match = false;
        for (const auto& r : a.reports)
            if (r.smallest_max && r.bounds == *row.expected) match = true;
        if (!match) {
            ok = false;
            if (res.note.empty()) res.note = "no smallest-max report equals " + bounds_str(*row.expected);
        }
    }
    res.status = ok ? BenchStatus::Pass : BenchStatus::Fail;
    return res;
}

}  // namespace shel
