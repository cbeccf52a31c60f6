#include <gtest/gtest.h>

#include "shel/bench.hpp"

using namespace shel;

namespace {

int ops(const Expr& e) {
    if (e.op() == Op::Var) return 0;
    if (e.op() == Op::Sqrt) return 1 + ops(e.lhs());
    return 1 + ops(e.lhs()) + ops(e.rhs());
}

}  // namespace

TEST(Generators, Shapes) {
    EXPECT_EQ(print(gen_sum(3)), "(Add (Add x1 x2) x3)");
    EXPECT_EQ(print(gen_norm(2)), "(Sqrt (Add (Mul x1 x1) (Mul x2 x2)))");
    EXPECT_EQ(print(gen_dotprod(4)), "(Add (Mul x1 y1) (Mul x2 y2))");
    EXPECT_EQ(free_vars(gen_linear(3)).size(), 3u);
    EXPECT_EQ(free_vars(gen_quad(4)).size(), 4u);
    EXPECT_EQ(free_vars(gen_dotprod(6)).size(), 6u);
}

TEST(Generators, OperationCounts) {
    for (int n = 2; n <= 14; ++n) EXPECT_EQ(ops(gen_sum(n)), n - 1);
    for (int v = 2; v <= 7; ++v) EXPECT_EQ(ops(gen_linear(v)), 2 * (v - 1));
    for (int v = 1; v <= 7; ++v) EXPECT_EQ(ops(gen_norm(v)), 2 * v);
    for (int v = 2; v <= 5; ++v) EXPECT_EQ(ops(gen_quad(v)), 3 * (v - 1));
    for (int v : {4, 6, 8}) EXPECT_EQ(ops(gen_dotprod(v)), v - 1);
}

TEST(Rows, Table1Expectations) {
    std::map<std::string, Bound> want{{"sum/5", 4},          {"sum/10", 9},       {"linear/2", 1},
                                      {"linear/5", 4},       {"norm/1", {3, 2}},  {"norm/4", 3},
                                      {"quad/2", 3},         {"quad/4", 5},       {"dotprod/4", 1},
                                      {"dotprod/6", 2},      {"dotprod/8", 2}};
    auto rows = table1_rows();
    for (const auto& [name, b] : want) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const BenchRow& r) { return r.name == name; });
        ASSERT_NE(it, rows.end()) << name;
        EXPECT_EQ(it->expected_max, b) << name;
    }
    std::size_t desk = std::count_if(rows.begin(), rows.end(), [](const BenchRow& r) { return r.desk; });
    EXPECT_EQ(desk, 6u + 4u + 5u + 3u + 2u);
}

TEST(Rows, Table2HasEight) {
    auto rows = table2_rows();
    ASSERT_EQ(rows.size(), 8u);
    for (const auto& r : rows) EXPECT_TRUE(r.expected.has_value()) << r.name;
}

TEST(Run, Table2AllPass) {
    for (const auto& row : table2_rows()) {
        BenchResult r = run_bench_row(row, {}, 60);
        EXPECT_EQ(r.status, BenchStatus::Pass) << row.name << " found " << (r.found_max ? r.found_max->str() : "-")
                                               << " " << r.note;
    }
}

TEST(Run, SmallTable1Rows) {
    for (const auto& row : table1_rows()) {
        if (row.name != "sum/5" && row.name != "norm/2" && row.name != "linear/3" && row.name != "dotprod/4") continue;
        BenchResult r = run_bench_row(row, {}, 60);
        EXPECT_EQ(r.status, BenchStatus::Pass) << row.name << " " << r.note;
    }
}

TEST(Run, TimeoutIsSkipped) {
    BenchRow row = table1_rows().back();
    BenchResult r = run_bench_row(row, {}, 1e-3);
    EXPECT_EQ(r.status, BenchStatus::Skipped);
    EXPECT_TRUE(r.stats.timed_out);
}
