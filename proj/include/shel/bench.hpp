#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shel/bound.hpp"
#include "shel/expr.hpp"
#include "shel/synth.hpp"

namespace shel {

// Left-nested generators; variables are named x1.., a1.., y1.. as below.
Expr gen_sum(int n);      // x1 + ... + xn
Expr gen_linear(int v);   // x + (a1 x + ... + a_{v-1} x)
Expr gen_norm(int v);     // sqrt(x1 x1 + ... + xv xv)
Expr gen_quad(int v);     // x + (a1 x x + ... + a_{v-1} x x)
Expr gen_dotprod(int v);  // x1 y1 + ... + x_{v/2} y_{v/2}

struct BenchRow {
    std::string suite;  // "table1" or "table2"
    std::string name;   // e.g. "sum/5", "table2/3"
    Expr program;
    Bound expected_max;
    std::optional<std::map<std::string, Bound>> expected;  // per-variable, when published
    bool desk = true;  // false: published row beyond desk-scale sizes
};

std::vector<BenchRow> table1_rows();
std::vector<BenchRow> table2_rows();

enum class BenchStatus { Pass, Fail, Skipped };
const char* bench_status_name(BenchStatus s);

struct BenchResult {
    BenchRow row;
    BenchStatus status = BenchStatus::Fail;
    std::optional<Bound> found_max;
    std::vector<BoundReport> reports;
    EngineStats stats;
    double time_ms = 0;
    std::string note;
};

// Skipped when the engine stops on the time limit before saturating.
BenchResult run_bench_row(const BenchRow& row, EngineConfig cfg, double timeout_s = 120);

std::string bounds_str(const std::map<std::string, Bound>& b);

}  // namespace shel
