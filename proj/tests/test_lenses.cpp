#include <gtest/gtest.h>

#include "shel/lens.hpp"

using namespace shel;
using K = ShelObject;

namespace {

constexpr prec_t P = 256;
constexpr std::size_t kSamples = 1000;

const RoundingModel& b64() {
    static const RoundingModel m = unit_roundoff(Format::Binary64);
    return m;
}

}  // namespace

class Catalog : public ::testing::TestWithParam<std::size_t> {};

TEST_P(Catalog, BothConditionsHold) {
    auto cat = lens_catalog(b64());
    const auto& c = cat.at(GetParam());
    CheckReport r = check_conditions(c.lens, kSamples, b64(), P, c.sampler, 17);
    EXPECT_TRUE(r.passed()) << c.id << ": " << r.counterexample;
    EXPECT_EQ(r.samples, kSamples);
    EXPECT_LE(r.max_residual_log2, -128.0);
}

INSTANTIATE_TEST_SUITE_P(Lenses, Catalog, ::testing::Range<std::size_t>(0, lens_catalog(b64()).size()),
                         [](const auto& info) {
                             std::string id = lens_catalog(b64()).at(info.param).id;
                             std::string out = std::to_string(info.param) + "_";
                             for (char ch : id) out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
                             return out;
                         });

TEST(CatalogBinary32, PrimitivesHold) {
    RoundingModel m = unit_roundoff(Format::Binary32);
    for (const auto& c : lens_catalog(m)) {
        CheckReport r = check_conditions(c.lens, 200, m, P, c.sampler, 3);
        EXPECT_TRUE(r.passed()) << c.id << ": " << r.counterexample;
    }
}

TEST(Primitive, SourceBounds) {
    EXPECT_EQ(lens_add(2).source(), K::base(2, 3));
    EXPECT_EQ(lens_sub(0).source(), K::base(2, 1));
    EXPECT_EQ(lens_mul(2).source(), K::base(2, Bound(3, 2)));
    EXPECT_EQ(lens_sqrt(1).source(), K::base(1, 4));
    EXPECT_EQ(lens_div(2).source(), K::tensor(K::base(1, 3), K::base(1, 0)));
    EXPECT_EQ(lens_dmul(1, 1, 2).source(), K::star(K::base(1, 1), K::base(1, 3), 1));
    EXPECT_EQ(lens_dmul(1, 1, 2).target(), K::star(K::base(1, 1), K::base(1, 2), 2));
    EXPECT_EQ(lens_adddiv(1, 0, 1).source(), K::star(K::base(2, 1), K::base(1, 2), 1));
    EXPECT_EQ(lens_adddiv(1, 0, 1).target(), K::base(1, 0));
}

TEST(Primitive, AddWitnessAbsorbsRounding) {
    LensInstance li = bind(lens_add(0), {0.1, 0.2}, b64(), P);
    auto d = li.deltas();
    ASSERT_EQ(d.size(), 1u);
    auto w = li.witness();
    EXPECT_EQ(rp_distance(w[0], ExtReal(0.1, P) * exp(d[0])), ExtReal(P));
    EXPECT_EQ(li.outputs()[0], 0.1 + 0.2);
}

TEST(Primitive, BackwardRejectsOversizedShift) {
    LensInstance li = bind(lens_add(1), {1.5, 2.25}, b64(), P);
    ExtReal eps = eps_value(b64(), P);
    EXPECT_NO_THROW(li.backward({eps}));
    EXPECT_THROW(li.backward({eps * ExtReal(1.01, P)}), std::out_of_range);
}

TEST(Primitive, LogNeedsSmallBound) {
    EXPECT_NO_THROW(lens_log(1, b64()));
    mpz_class huge = mpz_class(1) << 60;
    EXPECT_THROW(lens_log(Bound(mpq_class(huge)), b64()), LensError);
}

TEST(Structural, ShareStarSideCondition) {
    EXPECT_NO_THROW(lens_share_star(3, K::base(1, 1), K::base(1, 2)));
    EXPECT_THROW(lens_share_star(3, K::base(1, 1), K::base(1, Bound(3, 2))), LensError);
    EXPECT_NO_THROW(lens_share_star(1, K::base(1, 5), K::base(1, 0)));
}

TEST(Structural, ShareTensorNeedsEqualBounds) {
    EXPECT_THROW(lens_share_tensor(K::base(1, 1), K::base(1, 2)), LensError);
}

TEST(Structural, PushCost) {
    LensSpec l = lens_push(1, 0, K::base(1, 1), K::base(1, 2));
    EXPECT_EQ(l.source(), K::star(K::base(1, 1), K::base(1, 3), 1));
    EXPECT_EQ(l.target(), K::tensor(K::base(1, 1), K::base(1, 2)));
    LensSpec up = lens_push(0, 3, K::base(1, 2), K::base(1, 0));
    EXPECT_EQ(up.source(), K::tensor(K::base(1, 2), K::base(1, 6)));
}

TEST(Structural, RearrangeIsCheckedExactly) {
    K a = K::base(1, 1), b = K::base(1, 2);
    // a wrong backward matrix breaks exactness and is rejected up front
    EXPECT_THROW(lens_rearrange(K::tensor(a, b), K::tensor(b, a), {1, 0}, IntMatrix{{1, 0}, {0, 1}}), LensError);
    EXPECT_NO_THROW(lens_rearrange(K::tensor(a, b), K::tensor(b, a), {1, 0}, IntMatrix{{0, 1}, {1, 0}}));
    // bound of the source value must cover the target one
    EXPECT_THROW(lens_rearrange(K::tensor(a, a), K::tensor(b, a), {0, 1}, IntMatrix{{1, 0}, {0, 1}}), LensError);
}

TEST(Combinator, ComposeChecksObjects) {
    EXPECT_THROW(compose(lens_add(0), lens_sqrt(0)), LensError);
    EXPECT_NO_THROW(compose(lens_add(2), lens_sqrt(0)));
}

TEST(Combinator, ComposeIsAssociative) {
    LensSpec a = lens_dup(Bound(3, 2)), b = lens_mul(2), c = lens_sqrt(0);
    LensSpec l = compose(compose(a, b), c), r = compose(a, compose(b, c));
    EXPECT_EQ(l.source(), r.source());
    for (double x : {0.3, 7.0, 1e-5}) {
        LensInstance li = bind(l, {x}, b64(), P), ri = bind(r, {x}, b64(), P);
        EXPECT_EQ(li.outputs(), ri.outputs());
        EXPECT_EQ(li.witness()[0], ri.witness()[0]);
    }
}

TEST(Combinator, ParallelStarDerivesTargetHom) {
    // merging two roots of scale 1 each into one base doubles the dependent's scale
    K b = K::base(1, 1);
    LensSpec l = parallel_star(lens_share_tensor(b, b), lens_id(K::base(1, 0)), 1);
    EXPECT_EQ(l.source(), K::star(K::tensor(b, b), K::base(1, 0), IntMatrix{{1, 1}}));
    EXPECT_EQ(l.target(), K::star(K::base(2, 1), K::base(1, 0), 2));
    EXPECT_TRUE(check_conditions(l, 500, b64(), P, log_uniform_sampler()).passed());
}

TEST(Combinator, ParallelStarRejectsRoundingRoot) {
    EXPECT_THROW(parallel_star(lens_sqrt(0), lens_id(K::base(1, 0)), 1), LensError);
    EXPECT_THROW(parallel_star(lens_mul(0), lens_id(K::base(1, 0)), 1), LensError);
}

TEST(Combinator, ParallelStarRejectsFractionalScale) {
    EXPECT_THROW(parallel_star(lens_id(K::base(1, 2)), lens_sqrt(0), 1), LensError);
}

TEST(Negative, UnderstatedSourceBoundIsCaught) {
    LensSpec bad = relabel_unchecked(lens_add(0), K::base(2, Bound(1, 2)));
    CheckReport r = check_conditions(bad, 1000, b64(), P, log_uniform_sampler(), 2);
    EXPECT_FALSE(r.passed());
    EXPECT_NE(r.counterexample.find("bound: "), std::string::npos);
}

TEST(Negative, HalvedMulBoundIsCaught) {
    LensSpec bad = relabel_unchecked(lens_mul(0), K::base(2, Bound(1, 4)));
    EXPECT_FALSE(check_conditions(bad, 1000, b64(), P, log_uniform_sampler(), 2).passed());
}

TEST(Primitive, LogSourceBound) {
    LensSpec l = lens_log(0, b64());
    EXPECT_EQ(l.source(), K::base(1, Bound(mpq_class(3 * b64().max_finite))));
    EXPECT_THROW(bind(l, {0.5}, b64(), P), EvalError);
}

TEST(Primitive, DMulFromTensor) {
    LensSpec l = lens_dmul(0, 0, 0);
    EXPECT_EQ(l.source(), K::tensor(K::base(1, 0), K::base(1, 1)));
    EXPECT_EQ(l.target(), K::star(K::base(1, 0), K::base(1, 0), 1));
}

TEST(Primitive, DegenerateDenominators) {
    LensInstance d = bind(lens_div(0), {3.0, 0.0}, b64(), P);
    EXPECT_EQ(d.outputs()[0], 0.0);
    auto w = d.witness();
    EXPECT_EQ(w[0], ExtReal(3.0, P));
    EXPECT_TRUE(w[1].is_zero());

    LensInstance a = bind(lens_adddiv(0, 0, 1), {2.0, -2.0, 5.0}, b64(), P);
    EXPECT_EQ(a.outputs()[0], 0.0);
}

TEST(Primitive, AddAtThree) {
    CheckReport r = check_conditions(lens_add(3), 1000, b64(), P, log_uniform_sampler(), 8);
    EXPECT_TRUE(r.passed()) << r.counterexample;
    EXPECT_EQ(lens_add(3).source(), K::base(2, 4));
}

TEST(Primitive, SqrtOfNegativeUsesMagnitude) {
    Sampler neg = [](const ShelObject&, std::mt19937_64& g) { return std::vector<double>{-draw_log_uniform(g, true)}; };
    CheckReport r = check_conditions(lens_sqrt(0), 1000, b64(), P, neg, 9);
    EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(Structural, DupPreservesShift) {
    LensInstance li = bind(lens_dup(2), {1.25}, b64(), P);
    ExtReal s(1e-17, P);
    auto b = li.backward({s});
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0], s);
}

TEST(Structural, ShareStarInverseShift) {
    // a root of scale 2 under a shared shift s leaves -s on the dependent
    LensInstance li = bind(lens_share_star(2, K::base(1, 1), K::base(1, 1)), {3.0, 4.0}, b64(), P);
    ExtReal s(1e-17, P);
    auto b = li.backward({s});
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0], s);
    EXPECT_EQ(b[1], -s);
}

TEST(Combinator, MulThenSqrt) {
    EXPECT_EQ(compose(lens_mul(2), lens_sqrt(0)).source(), K::base(2, Bound(3, 2)));
    EXPECT_EQ(compose({lens_dup(Bound(3, 2)), lens_mul(2), lens_sqrt(0)}).source(), K::base(1, Bound(3, 2)));
}

TEST(Combinator, IdStarAddOnDependent) {
    LensSpec l = parallel_star(lens_id(K::base(1, 0)), lens_add(1), 1);
    EXPECT_EQ(l.source(), K::star(K::base(1, 0), K::base(2, 2), 1));
    EXPECT_TRUE(check_conditions(l, 1000, b64(), P).passed());
}

TEST(Combinator, ParallelMulSqrt) {
    LensSpec l = parallel(lens_mul(0), lens_sqrt(0));
    EXPECT_EQ(l.source(), K::tensor(K::base(2, Bound(1, 2)), K::base(1, 2)));
    CheckReport r = check_conditions(l, 1000, b64(), P, log_uniform_sampler(), 10);
    EXPECT_TRUE(r.passed()) << r.counterexample;
}
