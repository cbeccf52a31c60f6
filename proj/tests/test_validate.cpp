#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "shel/validate.hpp"

using namespace shel;

namespace {

constexpr prec_t P = 256;

const RoundingModel& b64() {
    static const RoundingModel m = unit_roundoff(Format::Binary64);
    return m;
}

CertifyOptions opts(std::size_t n) {
    CertifyOptions o;
    o.samples = n;
    o.prec = P;
    o.seed = 11;
    return o;
}

}  // namespace

class Cases : public ::testing::TestWithParam<std::size_t> {};

TEST_P(Cases, PipelineMatchesExpectedBounds) {
    auto cases = case_study_pipelines();
    const CaseStudy& c = cases.at(GetParam());
    const auto& src = c.lens.source().bounds();
    ASSERT_EQ(src.size(), c.vars.size());
    for (std::size_t i = 0; i < src.size(); ++i) EXPECT_EQ(src[i], c.expected.at(c.vars[i])) << c.vars[i];

    CheckReport chk = check_conditions(c.lens, 1000, b64(), P, c.sampler, 7);
    EXPECT_TRUE(chk.passed()) << c.name << ": " << chk.counterexample;

    StabilityReport r = certify_lens(c.program, c.lens, c.vars, c.expected, b64(), c.sampler, opts(1000));
    EXPECT_TRUE(r.passed()) << r.to_json();
    EXPECT_EQ(r.samples, 1000u);
}

INSTANTIATE_TEST_SUITE_P(CaseStudies, Cases, ::testing::Range<std::size_t>(0, 5));

TEST(Cases, Names) {
    std::vector<std::string> names;
    for (const auto& c : case_study_pipelines()) names.push_back(c.name);
    EXPECT_EQ(names, (std::vector<std::string>{"x+xy", "x+ax^2", "cholesky-l22", "weighted-average-push",
                                               "weighted-average-adddiv"}));
}

TEST(Certify, DotProductTwoTerms) {
    Expr e = parse_expr("(Add (Mul x1 y1) (Mul x2 y2))");
    Analysis a = analyze(e);
    auto reps = certify_all(a, b64(), log_uniform_sampler(), opts(1000));
    ASSERT_FALSE(reps.empty());
    bool all_ones = false;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        EXPECT_TRUE(reps[i].passed()) << reps[i].to_json();
        bool ones = true;
        for (const auto& [v, b] : a.reports[i].bounds) ones = ones && b == Bound(1);
        all_ones = all_ones || ones;
    }
    EXPECT_TRUE(all_ones);
}

TEST(Certify, MismatchedReportThrows) {
    Expr e = parse_expr("(Mul a b)");
    Analysis a = analyze(e);
    ASSERT_FALSE(a.reports.empty());
    Derivation d = a.db.extract_derivation(a.reports[0]);
    BoundReport wrong = a.reports[0];
    wrong.bounds["a"] = Bound(7);
    EXPECT_THROW(certify(e, wrong, d, b64(), log_uniform_sampler(), opts(10)), std::invalid_argument);
}

TEST(Certify, HalvedBoundsFail) {
    for (const auto& c : case_study_pipelines()) {
        if (c.name != "x+xy" && c.name != "x+ax^2") continue;
        std::map<std::string, Bound> half;
        for (const auto& [v, b] : c.expected) half[v] = b / Bound(2);
        StabilityReport r = certify_lens(c.program, c.lens, c.vars, half, b64(), c.sampler, opts(1000));
        EXPECT_FALSE(r.passed()) << c.name;
        EXPECT_FALSE(r.counterexamples.empty());
    }
}

TEST(Certify, JsonShape) {
    auto cases = case_study_pipelines();
    const CaseStudy& c = cases.at(0);
    StabilityReport r = certify_lens(c.program, c.lens, c.vars, c.expected, b64(), c.sampler, opts(50));
    auto j = nlohmann::json::parse(r.to_json());
    EXPECT_EQ(j["samples"], 50);
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_EQ(j["claimed"]["x"], "1");
    EXPECT_TRUE(j["max_ratio"].contains("y"));
}

TEST(Oracle, ExactInputsAreFixed) {
    // 1*2 + 3*4 = 14 with no rounding anywhere
    auto w = oracle_dotprod(1, 3, 2, 4, b64(), P);
    EXPECT_EQ(w[0], ExtReal(1.0, P));
    EXPECT_EQ(w[1], ExtReal(3.0, P));
    EXPECT_EQ(w[2], ExtReal(2.0, P));
    EXPECT_EQ(w[3], ExtReal(4.0, P));
}

TEST(Oracle, WitnessIsExactAndWithinOneEps) {
    Expr e = parse_expr("(Add (Mul x1 y1) (Mul x2 y2))");
    ExtReal eps = eps_value(b64(), P);
    ExtReal slack = ExtReal::pow2(-(P - 16), P);
    ExtReal tol = ExtReal::pow2(-static_cast<long>(P / 2), P);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> mant(1, 2);
    std::uniform_int_distribution<int> ex(-20, 20), sg(0, 1);
    auto draw = [&] { return (sg(rng) ? -1 : 1) * std::ldexp(mant(rng), ex(rng)); };
    int done = 0;
    for (int k = 0; k < 400; ++k) {
        double x1 = draw(), x2 = draw(), y1 = draw(), y2 = draw();
        Valuation v{{"x1", x1}, {"x2", x2}, {"y1", y1}, {"y2", y2}};
        FloatEval fe;
        try {
            fe = eval_float(e, v, b64(), P);
        } catch (const EvalError&) {
            continue;
        }
        auto w = oracle_dotprod(x1, x2, y1, y2, b64(), P);
        RealValuation rv{{"x1", w[0]}, {"x2", w[1]}, {"y1", w[2]}, {"y2", w[3]}};
        EXPECT_LE(rp_distance(eval_real(e, rv, P), ExtReal(fe.value, P)), tol);
        double in[4] = {x1, x2, y1, y2};
        for (int i = 0; i < 4; ++i) EXPECT_LE(rp_distance(ExtReal(in[i], P), w[i]), eps + slack);
        ++done;
    }
    EXPECT_GT(done, 300);
}

TEST(Audit, SmallRunsAreClean) {
    for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt}) {
        AuditReport r = audit_rounding(op, 20000, b64(), P, 9, 1);
        EXPECT_TRUE(r.passed()) << op_name(op) << " " << r.worst;
        EXPECT_LE(r.max_delta_over_eps, 1.0);
        EXPECT_GT(r.max_delta_over_eps, 0.5);
    }
    AuditReport f = audit_rounding(Op::Mul, 20000, unit_roundoff(Format::Binary32), P, 9, 1);
    EXPECT_TRUE(f.passed()) << f.worst;
}

TEST(Cases, AddDivWeightedAverageLeavesWeightsExact) {
    for (const auto& c : case_study_pipelines())
        if (c.name == "weighted-average-adddiv") {
            EXPECT_EQ(c.expected.at("w1"), Bound(0));
            EXPECT_EQ(c.expected.at("w2"), Bound(0));
            EXPECT_EQ(c.expected.at("x1"), Bound(4));
        }
}

TEST(Cases, CholeskyBounds) {
    for (const auto& c : case_study_pipelines())
        if (c.name == "cholesky-l22")
            EXPECT_EQ(c.expected, (std::map<std::string, Bound>{{"a11", 2}, {"a21", 3}, {"a22", 3}}));
}
