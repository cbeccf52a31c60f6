#include <gtest/gtest.h>

#include <cfloat>
#include <cmath>
#include <random>

#include "shel/bound.hpp"
#include "shel/expr.hpp"
#include "shel/numerics.hpp"
#include "shel/object.hpp"

using namespace shel;

namespace {

constexpr prec_t P = 256;

// ln of an exact rational, evaluated independently of rounded_op.
ExtReal log_of(const mpq_class& q) { return log(ExtReal(q, P)); }

}  // namespace

TEST(RoundingModel, Binary64Constants) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    mpz_class two53 = mpz_class(1) << 53;
    EXPECT_EQ(m.u, mpq_class(1, two53));
    EXPECT_EQ(m.eps, mpq_class(1, two53 - 1));
    EXPECT_EQ(m.max_finite, mpq_class(DBL_MAX));
    EXPECT_EQ(m.min_normal, DBL_MIN);
}

TEST(RoundingModel, Binary32Constants) {
    RoundingModel m = unit_roundoff(Format::Binary32);
    EXPECT_EQ(m.u, mpq_class(1, 1 << 24));
    EXPECT_EQ(m.eps, mpq_class(1, (1 << 24) - 1));
    EXPECT_EQ(m.max_finite, mpq_class(static_cast<double>(FLT_MAX)));
}

TEST(RoundingModel, FormatNames) {
    EXPECT_EQ(parse_format("binary64"), Format::Binary64);
    EXPECT_EQ(parse_format("float"), Format::Binary32);
    EXPECT_THROW(parse_format("binary16"), std::invalid_argument);
}

TEST(RpDistance, Values) {
    ExtReal one(1.0, P), e = exp(one);
    EXPECT_LT(abs(rp_distance(one, e) - one), ExtReal::pow2(-250, P));
    EXPECT_TRUE(rp_distance(ExtReal(2.0, P), ExtReal(-2.0, P)).is_inf());
    EXPECT_TRUE(rp_distance(ExtReal(0.0, P), ExtReal(0.0, P)).is_zero());
    EXPECT_TRUE(rp_distance(ExtReal(0.0, P), ExtReal(1.0, P)).is_inf());
    EXPECT_TRUE(rp_distance(ExtReal(-3.0, P), ExtReal(-3.0, P)).is_zero());
}

TEST(RpDistance, SymmetricAndTriangle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> mag(-40, 40);
    for (int i = 0; i < 2000; ++i) {
        double s = (rng() & 1) ? 1 : -1;
        ExtReal a(s * std::exp2(mag(rng)), P), b(s * std::exp2(mag(rng)), P), c(s * std::exp2(mag(rng)), P);
        EXPECT_EQ(rp_distance(a, b), rp_distance(b, a));
        ExtReal slack = ExtReal::pow2(-200, P);
        EXPECT_LE(rp_distance(a, c), rp_distance(a, b) + rp_distance(b, c) + slack);
    }
}

TEST(RoundedOp, ExactOperationHasZeroDelta) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    Rounded r = rounded_op(m, Op::Add, 1.0, 2.0, P);
    EXPECT_EQ(r.value, 3.0);
    EXPECT_TRUE(r.delta.is_zero());
    EXPECT_TRUE(rounded_op(m, Op::Sqrt, 9.0, 0.0, P).delta.is_zero());
}

TEST(RoundedOp, OneThird) {
    // fl(1/3) = 6004799503160661 / 2^54, so delta = ln(1 - 2^-54)
    RoundingModel m = unit_roundoff(Format::Binary64);
    Rounded r = rounded_op(m, Op::Div, 1.0, 3.0, P);
    EXPECT_EQ(mpq_class(r.value), mpq_class(mpz_class("6004799503160661"), mpz_class(1) << 54));
    mpq_class ratio = 1 - mpq_class(1, mpz_class(1) << 54);
    EXPECT_LT(abs(r.delta - log_of(ratio)), ExtReal::pow2(-300, P));
}

TEST(RoundedOp, PointOnePlusPointTwo) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    Rounded r = rounded_op(m, Op::Add, 0.1, 0.2, P);
    EXPECT_EQ(r.value, 0.30000000000000004);
    mpq_class exact = mpq_class(0.1) + mpq_class(0.2);
    mpq_class ratio = mpq_class(r.value) / exact;
    ratio.canonicalize();
    EXPECT_LT(abs(r.delta - log_of(ratio)), ExtReal::pow2(-300, P));
    EXPECT_LE(abs(r.delta), eps_value(m, P));
}

TEST(RoundedOp, DomainErrors) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    EXPECT_THROW(rounded_op(m, Op::Div, 1.0, 0.0, P), EvalError);
    EXPECT_THROW(rounded_op(m, Op::Mul, 1e300, 1e300, P), EvalError);
    EXPECT_THROW(rounded_op(m, Op::Add, 1.0, -1.0, P), EvalError);
    EXPECT_THROW(rounded_op(m, Op::Mul, 1e-300, 1e-20, P), EvalError);
    EvalOptions strict;
    strict.strict_sqrt = true;
    EXPECT_THROW(rounded_op(m, Op::Sqrt, -4.0, 0.0, P, strict), EvalError);
    EXPECT_EQ(rounded_op(m, Op::Sqrt, -4.0, 0.0, P).value, 2.0);
}

TEST(RoundedOp, Binary32Rounding) {
    RoundingModel m = unit_roundoff(Format::Binary32);
    EXPECT_FALSE(representable(m, 0.1));
    EXPECT_TRUE(representable(m, 0.5));
    Rounded r = rounded_op(m, Op::Div, 1.0, 3.0, P);
    EXPECT_EQ(r.value, static_cast<double>(1.0f / 3.0f));
    EXPECT_LE(abs(r.delta), eps_value(m, P));
    EXPECT_GT(abs(r.delta), eps_value(unit_roundoff(Format::Binary64), P));
}

TEST(RoundedOp, RandomDeltasWithinEps) {
    for (Format f : {Format::Binary64, Format::Binary32}) {
        RoundingModel m = unit_roundoff(f);
        ExtReal eps = eps_value(m, P);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> mag(-20, 20);
        for (int i = 0; i < 4000; ++i) {
            double a = std::exp2(mag(rng)), b = std::exp2(mag(rng));
            if (f == Format::Binary32) {
                a = static_cast<float>(a);
                b = static_cast<float>(b);
            }
            if (rng() & 1) b = -b;
            for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt}) {
                try {
                    EXPECT_LE(abs(rounded_op(m, op, op == Op::Sqrt ? a : a, b, P).delta), eps);
                } catch (const EvalError&) {
                }
            }
        }
    }
}

TEST(RoundedLog, MatchesCorrectRounding) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    Rounded r = rounded_log(m, 10.0, P);
    EXPECT_EQ(r.value, std::log(10.0));
    EXPECT_LE(abs(r.delta), eps_value(m, P));
    EXPECT_THROW(rounded_log(m, 1.0, P), EvalError);  // ln 1 = 0 is not a valid site result
}

TEST(Eval, FloatMatchesNativeAndLogsEachSite) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    Expr e = parse_expr("(Add (Mul a a) (Mul b b))");
    double a = 0.1, b = 0.7;
    FloatEval fe = eval_float(e, {{"a", a}, {"b", b}}, m, P);
    EXPECT_EQ(fe.value, a * a + b * b);
    ASSERT_EQ(fe.deltas.size(), 3u);
    EXPECT_EQ(fe.deltas[0].op, Op::Mul);
    EXPECT_EQ(fe.deltas[2].op, Op::Add);
    EXPECT_EQ(fe.deltas[2].site, 2u);
}

TEST(Eval, FloatEqualsRealTimesDeltas) {
    // a * b rounds once: fl(ab) = ab e^delta
    RoundingModel m = unit_roundoff(Format::Binary64);
    Expr e = parse_expr("(Mul a b)");
    FloatEval fe = eval_float(e, {{"a", 0.1}, {"b", 0.3}}, m, P);
    ExtReal real = eval_real(e, Valuation{{"a", 0.1}, {"b", 0.3}}, P);
    ExtReal back = real * exp(fe.deltas[0].delta);
    EXPECT_LT(rp_distance(back, ExtReal(fe.value, P)), ExtReal::pow2(-250, P));
}

TEST(Eval, SqrtUsesMagnitude) {
    Expr e = parse_expr("(Sqrt a)");
    ExtReal r = eval_real(e, Valuation{{"a", -9.0}}, P);
    EXPECT_EQ(r, ExtReal(3.0, P));
}

TEST(Eval, MissingVariable) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    EXPECT_ANY_THROW(eval_float(parse_expr("(Add a b)"), {{"a", 1.0}}, m, P));
}

TEST(BoundType, ArithmeticAndText) {
    EXPECT_EQ(Bound::parse("3/2").str(), "3/2");
    EXPECT_EQ(Bound(4, 2).str(), "2");
    EXPECT_EQ(Bound(1) + Bound(1, 2), Bound(3, 2));
    EXPECT_EQ((Bound(3) + 1) / Bound(2), Bound(2));
    EXPECT_THROW(Bound(1) - Bound(2), std::exception);
    EXPECT_THROW(Bound::parse("-1"), std::exception);
    EXPECT_LT(Bound(3, 2), Bound(2));
}

TEST(ExprType, ParsePrintRoundTrip) {
    for (const char* s : {"(Add x (Add (Mul a x) (Mul (Mul b x) x)))", "(Sqrt (Add (Mul a x) (Sqrt b)))", "a",
                          "(Div (Sub a b) c)"}) {
        EXPECT_EQ(print(parse_expr(s)), s);
    }
}

TEST(ExprType, CommutativeCanonicalForm) {
    EXPECT_TRUE(equivalent(parse_expr("(Add a b)"), parse_expr("(Add b a)")));
    EXPECT_TRUE(equivalent(parse_expr("(Mul (Add a b) c)"), parse_expr("(Mul c (Add b a))")));
    EXPECT_FALSE(equivalent(parse_expr("(Sub a b)"), parse_expr("(Sub b a)")));
    EXPECT_FALSE(equivalent(parse_expr("(Add (Add a b) c)"), parse_expr("(Add a (Add b c))")));
}

TEST(ExprType, FreeVarsAndDepth) {
    Expr e = parse_expr("(Add x (Add (Mul a x) (Mul (Mul b x) x)))");
    EXPECT_EQ(free_vars(e), (std::vector<std::string>{"x", "a", "b"}));  // first occurrence
    EXPECT_EQ(mul_depth(e), 2u);
}

TEST(ExprType, ParseErrors) {
    EXPECT_THROW(parse_expr("(Add a"), ParseError);
    EXPECT_THROW(parse_expr("(Pow a b)"), ParseError);
    EXPECT_THROW(parse_expr("a b"), ParseError);
    EXPECT_THROW(parse_expr(")"), ParseError);
}

TEST(ObjectType, StarAction) {
    ShelObject s = ShelObject::star(ShelObject::base(1, 1), ShelObject::base(1, 0), 2);
    EXPECT_EQ(s.dims(), 2u);
    EXPECT_EQ(s.action(), (IntMatrix{{1, 0}, {2, 1}}));
    std::vector<ExtReal> x = {ExtReal(3.0, P), ExtReal(5.0, P)};
    ExtReal t(0.25, P);
    auto y = act(s, x, {t, ExtReal(P)});
    EXPECT_LT(rp_distance(y[1], ExtReal(5.0, P) * exp(ExtReal(0.5, P))), ExtReal::pow2(-250, P));
}

TEST(ObjectType, ZeroStarIsTensor) {
    ShelObject a = ShelObject::base(1, 1), b = ShelObject::base(2, 3);
    EXPECT_EQ(ShelObject::star(a, b, 0), ShelObject::tensor(a, b));
    EXPECT_EQ(ShelObject::tensor(a, b).bounds(), (std::vector<Bound>{1, 3}));
    EXPECT_EQ(ShelObject::unit().dims(), 0u);
}

TEST(RoundedOp, TinyAddendIsAbsorbed) {
    RoundingModel m = unit_roundoff(Format::Binary64);
    Rounded r = rounded_op(m, Op::Add, 1.0, std::ldexp(1.0, -60), P);
    EXPECT_EQ(r.value, 1.0);
    // independent route: -log1p(2^-60) at twice the working precision
    mpfr_t t;
    mpfr_init2(t, 2 * P);
    mpfr_set_ui_2exp(t, 1, -60, MPFR_RNDN);
    mpfr_log1p(t, t, MPFR_RNDN);
    mpfr_neg(t, t, MPFR_RNDN);
    ExtReal want(P);
    mpfr_set(want.get(), t, MPFR_RNDN);
    mpfr_clear(t);
    EXPECT_LE(abs(r.delta - want), ExtReal::pow2(-(P - 16), P));
    EXPECT_LE(abs(r.delta), eps_value(m, P));
}

TEST(RpDistance, ShiftAndSign) {
    ExtReal x(-7.5, P), d(1e-3, P);
    EXPECT_LE(abs(rp_distance(x, x * exp(d)) - d), ExtReal::pow2(-240, P));
    EXPECT_TRUE(rp_distance(ExtReal(1.0, P), ExtReal(-1.0, P)).is_inf());
}

TEST(ObjectType, ActionComposes) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<ShelObject> objs = {
        ShelObject::star(ShelObject::base(2, 1), ShelObject::base(1, 0), 3),
        ShelObject::tensor(ShelObject::base(1, 1), ShelObject::star(ShelObject::base(1, 0), ShelObject::base(2, 2), 1)),
        ShelObject::star(ShelObject::tensor(ShelObject::base(1, 1), ShelObject::base(1, 1)), ShelObject::base(1, 0),
                         IntMatrix{{1, 2}}),
    };
    for (const auto& o : objs)
        for (int k = 0; k < 50; ++k) {
            std::vector<ExtReal> x;
            for (std::size_t i = 0; i < o.arity(); ++i) x.emplace_back(u(rng) * 100, P);
            Shift s1, s2, sum;
            for (std::size_t j = 0; j < o.dims(); ++j) {
                s1.emplace_back(u(rng), P);
                s2.emplace_back(u(rng), P);
                sum.push_back(s1.back() + s2.back());
            }
            auto a = act(o, act(o, x, s1), s2), b = act(o, x, sum);
            for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(rp_distance(a[i], b[i]), ExtReal::pow2(-240, P));
        }
}

TEST(ObjectType, StarActionScaleOne) {
    ShelObject s = ShelObject::star(ShelObject::base(1, 0), ShelObject::base(1, 0), 1);
    ExtReal x(2.0, P), y(3.0, P), a(0.125, P), b(-0.5, P);
    auto r = act(s, {x, y}, {a, b});
    EXPECT_LE(rp_distance(r[0], x * exp(a)), ExtReal::pow2(-250, P));
    EXPECT_LE(rp_distance(r[1], y * exp(a + b)), ExtReal::pow2(-250, P));
}
