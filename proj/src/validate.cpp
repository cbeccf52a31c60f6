#include "shel/validate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "shel/context.hpp"

namespace shel {

namespace {

constexpr std::size_t kMaxCounterexamples = 5;
constexpr int kMaxDraws = 100;

unsigned thread_count(unsigned requested, std::size_t work) {
    unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(1, work)));
}

// Runs body(i) for i in [0, n) over contiguous chunks; results land in slot i.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, unsigned threads, F body) {
    std::vector<R> out(n);
    unsigned t = thread_count(threads, n);
    if (t == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = body(i);
        return out;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + t - 1) / t;
    for (unsigned k = 0; k < t; ++k) {
        std::size_t lo = k * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) out[i] = body(i);
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

double to_format(const RoundingModel& m, double x) {
    return m.format == Format::Binary32 ? static_cast<double>(static_cast<float>(x)) : x;
}

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

std::string show(const std::vector<std::string>& vars, const std::vector<double>& x) {
    std::ostringstream os;
    os.precision(17);
    os << "{";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << vars[i] << ": " << x[i];
    os << "}";
    return os.str();
}

struct SampleResult {
    bool drawn = false;
    std::size_t resampled = 0;
    std::vector<double> ratio;
    double residual_log2 = -1e300;
    std::string failure;
};

}  // namespace

std::string StabilityReport::to_json(int indent) const {
    nlohmann::ordered_json j;
    j["program"] = program;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& v : vars) c[v] = claimed.at(v).str();
    j["claimed"] = c;
    j["samples"] = samples;
    j["resampled"] = resampled;
    j["failures"] = failures;
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (const auto& v : vars) r[v] = max_ratio.at(v);
    j["max_ratio"] = r;
    j["max_residual_log2"] = max_residual_log2;
    j["passed"] = passed();
    j["counterexamples"] = counterexamples;
    return j.dump(indent);
}

StabilityReport certify_lens(const Expr& e, const LensSpec& lens, const std::vector<std::string>& vars,
                             const std::map<std::string, Bound>& claimed, const RoundingModel& m,
                             const Sampler& sampler, const CertifyOptions& opt) {
    const ShelObject& src = lens.source();
    if (vars.size() != src.arity()) throw std::invalid_argument("certify: variable count does not match the lens");
    if (lens.target().arity() != 1) throw std::invalid_argument("certify: lens must produce one value");
    for (const auto& v : vars)
        if (!claimed.count(v)) throw std::invalid_argument("certify: no claimed bound for " + v);

    const prec_t prec = opt.prec;
    const ExtReal eps = eps_value(m, prec);
    const ExtReal tol = ExtReal::pow2(-(prec / 2), prec);
    const ExtReal slack = ExtReal::pow2(-(prec - 16), prec);
    std::vector<ExtReal> limit;
    for (const auto& v : vars) limit.push_back(ExtReal(claimed.at(v).q(), prec) * eps + slack);

    auto run = [&](std::size_t s) {
        SampleResult res;
        std::seed_seq ss{opt.seed, static_cast<std::uint64_t>(s)};
        std::mt19937_64 rng(ss);
        std::optional<LensInstance> inst;
        std::vector<double> x;
        FloatEval fe;
        for (int attempt = 0; attempt < kMaxDraws && !inst; ++attempt) {
            x = sampler(src, rng);
            for (auto& v : x) v = to_format(m, v);
            Valuation val;
            for (std::size_t i = 0; i < x.size(); ++i) val[vars[i]] = x[i];
            try {
                fe = eval_float(e, val, m, prec, opt.eval);
                inst.emplace(lens, x, m, prec, opt.eval);
            } catch (const EvalError&) {
                ++res.resampled;
            }
        }
        if (!inst) {
            res.failure = "no valid input after " + std::to_string(kMaxDraws) + " draws";
            return res;
        }
        res.drawn = true;
        double out = inst->outputs()[0];
        if (!same_double(out, fe.value)) {
            std::ostringstream os;
            os.precision(17);
            os << "lens output " << out << " differs from program output " << fe.value << " at " << show(vars, x);
            res.failure = os.str();
            return res;
        }
        std::vector<ExtReal> w = inst->witness();
        RealValuation rv;
        for (std::size_t i = 0; i < w.size(); ++i) rv.emplace(vars[i], w[i]);
        ExtReal r = rp_distance(eval_real(e, rv, prec, opt.eval), ExtReal(out, prec));
        res.residual_log2 = r.log2_abs();
        if (r > tol) res.failure = "witness residual " + r.str(6) + " at " + show(vars, x);
        for (std::size_t i = 0; i < w.size(); ++i) {
            ExtReal d = rp_distance(ExtReal(x[i], prec), w[i]);
            res.ratio.push_back((d / eps).to_double());
            if (d > limit[i] && res.failure.empty())
                res.failure = vars[i] + " moved " + (d / eps).str(8) + " eps, claimed " + claimed.at(vars[i]).str() +
                              " at " + show(vars, x);
        }
        return res;
    };

    auto results = parallel_map<SampleResult>(opt.samples, opt.threads, run);

    StabilityReport rep;
    rep.program = print(e);
    rep.vars = vars;
    for (const auto& v : vars) {
        rep.claimed[v] = claimed.at(v);
        rep.max_ratio[v] = 0;
    }
    for (const auto& r : results) {
        rep.resampled += r.resampled;
        if (r.drawn) ++rep.samples;
        rep.max_residual_log2 = std::max(rep.max_residual_log2, r.residual_log2);
        for (std::size_t i = 0; i < r.ratio.size(); ++i)
            rep.max_ratio[vars[i]] = std::max(rep.max_ratio[vars[i]], r.ratio[i]);
        if (!r.failure.empty()) {
            ++rep.failures;
            if (rep.counterexamples.size() < kMaxCounterexamples) rep.counterexamples.push_back(r.failure);
        }
    }
    return rep;
}

StabilityReport certify(const Expr& e, const BoundReport& report, const Derivation& d, const RoundingModel& m,
                        const Sampler& sampler, const CertifyOptions& opt) {
    if (serialize(d.start) != serialize(start_context(report.bounds)))
        throw std::invalid_argument("certify: derivation does not start at the reported bounds");
    LensSpec lens = derivation_to_lens(d);
    std::vector<std::string> vars;
    for (const auto& x : value_labels(d.start)) vars.push_back(x.name());
    return certify_lens(e, lens, vars, report.bounds, m, sampler, opt);
}

std::vector<StabilityReport> certify_all(const Analysis& a, const RoundingModel& m, const Sampler& sampler,
                                         const CertifyOptions& opt) {
    std::vector<StabilityReport> out;
    for (const auto& r : a.reports) out.push_back(certify(a.program, r, a.db.extract_derivation(r), m, sampler, opt));
    return out;
}

std::array<ExtReal, 4> oracle_dotprod(double x1, double x2, double y1, double y2, const RoundingModel& m,
                                      prec_t prec) {
    Rounded p1 = rounded_op(m, Op::Mul, x1, y1, prec);
    Rounded p2 = rounded_op(m, Op::Mul, x2, y2, prec);
    Rounded s = rounded_op(m, Op::Add, p1.value, p2.value, prec);
    ExtReal half(0.5, prec);
    ExtReal k1 = exp((p1.delta + s.delta) * half);
    ExtReal k2 = exp((p2.delta + s.delta) * half);
    return {ExtReal(x1, prec) * k1, ExtReal(x2, prec) * k2, ExtReal(y1, prec) * k1, ExtReal(y2, prec) * k2};
}

// ---- case studies -------------------------------------------------------------

namespace {

using K = ShelObject;

std::vector<Expr> labels(std::initializer_list<const char*> names) {
    std::vector<Expr> out;
    for (const char* n : names) out.push_back(Expr::var(n));
    return out;
}

LensSpec reorder(const ShelObject& src, std::initializer_list<const char*> from, const ShelObject& tgt,
                 std::initializer_list<const char*> to) {
    return permutation_lens(src, labels(from), tgt, labels(to));
}

CaseStudy x_plus_xy() {
    K x = K::base(1, 1), y = K::base(1, 1);
    LensSpec l = compose({lens_dmul(0, 1, 0), lens_share_star(1, x, K::base(1, 0)), lens_add(0)});
    return {"x+xy", parse_expr("(Add x (Mul x y))"), l, {"x", "y"}, {{"x", 1}, {"y", 1}}, log_uniform_sampler()};
}

CaseStudy x_plus_ax2() {
    K a = K::base(1, 3), x = K::base(1, 1);
    LensSpec l = compose({
        lens_swap(a, x),
        lens_dmul(0, 1, 2),
        lens_dmul(1, 1, 1),
        lens_share_star(2, x, K::base(1, 1)),
        lens_add(0),
    });
    return {"x+ax^2", parse_expr("(Add x (Mul (Mul a x) x))"), l, {"a", "x"}, {{"a", 3}, {"x", 1}},
            log_uniform_sampler()};
}

CaseStudy cholesky_l22() {
    K a11 = K::base(1, 2), a21 = K::base(1, 3), a22 = K::base(1, 3), l11 = K::base(1, 0);
    K rest = K::tensor(a21, a22);
    K after_div = K::tensor(K::tensor(a21, l11), a22);
    LensSpec l = compose({
        parallel(lens_sqrt(0), lens_id(rest)),
        reorder(K::tensor(l11, rest), {"l11", "a21", "a22"}, after_div, {"a21", "l11", "a22"}),
        parallel(lens_div(2), lens_id(a22)),
        parallel(lens_dup(2), lens_id(a22)),
        parallel(lens_mul(3), lens_id(a22)),
        lens_swap(K::base(1, 3), a22),
        lens_share_tensor(a22, K::base(1, 3)),
        lens_sub(2),
        lens_sqrt(0),
    });
    return {"cholesky-l22",
            parse_expr("(Sqrt (Sub a22 (Mul (Div a21 (Sqrt a11)) (Div a21 (Sqrt a11)))))"),
            l,
            {"a11", "a21", "a22"},
            {{"a11", 2}, {"a21", 3}, {"a22", 3}},
            spd_sampler()};
}

Sampler weights_then_values() {
    return [](const ShelObject& o, std::mt19937_64& rng) {
        std::vector<double> v(o.arity());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = draw_log_uniform(rng, i < 2);
        return v;
    };
}

const char* kWeightedAverage = "(Div (Add (Mul w1 x1) (Mul w2 x2)) (Add w1 w2))";

CaseStudy weighted_average_push() {
    K w = K::base(1, 1), x = K::base(1, 4), m = K::base(1, 2);
    K src = K::tensor({w, w, x, x});
    K paired = K::tensor(K::tensor(w, x), K::tensor(w, x));
    K freed = K::tensor(K::tensor(w, m), K::tensor(w, m));
    K grouped = K::tensor(K::tensor(w, w), K::tensor(m, m));
    LensSpec push = lens_push(1, 0, w, m);
    LensSpec l = compose({
        reorder(src, {"w1", "w2", "x1", "x2"}, paired, {"w1", "x1", "w2", "x2"}),
        parallel(lens_dmul(0, 1, 3), lens_dmul(0, 1, 3)),
        parallel(push, push),
        reorder(freed, {"w1", "m1", "w2", "m2"}, grouped, {"w1", "w2", "m1", "m2"}),
        parallel(lens_share_tensor(w, w), lens_share_tensor(m, m)),
        parallel(lens_add(0), lens_add(1)),
        lens_swap(K::base(1, 0), K::base(1, 1)),
        lens_div(0),
    });
    return {"weighted-average-push", parse_expr(kWeightedAverage), l, {"w1", "w2", "x1", "x2"},
            {{"w1", 1}, {"w2", 1}, {"x1", 4}, {"x2", 4}}, weights_then_values()};
}

CaseStudy weighted_average_adddiv() {
    K w = K::base(1, 0), x = K::base(1, 4), m = K::base(1, 3);
    K src = K::tensor({w, w, x, x});
    K paired = K::tensor(K::tensor(w, x), K::tensor(w, x));
    K star = K::star(w, m, 1);
    LensSpec l = compose({
        reorder(src, {"w1", "w2", "x1", "x2"}, paired, {"w1", "x1", "w2", "x2"}),
        parallel(lens_dmul(0, 0, 3), lens_dmul(0, 0, 3)),
        lens_dist(star, star),
        parallel_star(lens_share_tensor(w, w), lens_share_tensor(m, m), IntMatrix{{1, 0}, {0, 1}}),
        parallel_star(lens_id(K::base(2, 0)), lens_add(2), 1),
        lens_adddiv(0, 0, 1),
    });
    return {"weighted-average-adddiv", parse_expr(kWeightedAverage), l, {"w1", "w2", "x1", "x2"},
            {{"w1", 0}, {"w2", 0}, {"x1", 4}, {"x2", 4}}, weights_then_values()};
}

}  // namespace

Sampler spd_sampler() {
    return [](const ShelObject&, std::mt19937_64& rng) {
        double a11 = draw_log_uniform(rng, true, -20, 20);
        double a22 = draw_log_uniform(rng, true, -20, 20);
        std::uniform_real_distribution<double> u(-0.999, 0.999);
        double a21 = u(rng) * std::sqrt(a11 * a22);
        return std::vector<double>{a11, a21, a22};
    };
}

std::vector<CaseStudy> case_study_pipelines() {
    return {x_plus_xy(), x_plus_ax2(), cholesky_l22(), weighted_average_push(), weighted_average_adddiv()};
}

// ---- rounding audit ------------------------------------------------------------

namespace {

struct Exponents {
    int lo, hi;
};

Exponents operand_range(Op op, const RoundingModel& m) {
    int emax = m.format == Format::Binary64 ? 1023 : 127;
    int emin = m.format == Format::Binary64 ? -1022 : -126;
    switch (op) {
    case Op::Mul:
    case Op::Div: return {emin / 2 + 1, emax / 2 - 1};
    case Op::Sqrt: return {emin, emax};
    default: return {emin, emax - 1};
    }
}

double draw_normal(std::mt19937_64& rng, const RoundingModel& m, Exponents r, bool positive) {
    std::uniform_int_distribution<int> ex(r.lo, r.hi);
    if (m.format == Format::Binary64) {
        std::uint64_t mant = rng() & ((std::uint64_t{1} << 52) - 1);
        double f = std::bit_cast<double>(mant | (std::uint64_t{1023} << 52));  // [1, 2)
        double v = std::ldexp(f, ex(rng));
        return positive || (rng() & 1) ? v : -v;
    }
    std::uint32_t mant = static_cast<std::uint32_t>(rng()) & ((1u << 23) - 1);
    float f = std::bit_cast<float>(mant | (127u << 23));
    float v = std::ldexp(f, ex(rng));
    return positive || (rng() & 1) ? v : -v;
}

// Nearby second operand, to exercise cancellation.
double near(std::mt19937_64& rng, const RoundingModel& m, double a) {
    int k = static_cast<int>(rng() % 64);
    double b = a;
    double dir = (rng() & 1) ? INFINITY : -INFINITY;
    for (int i = 0; i < k; ++i) {
        if (m.format == Format::Binary64) b = std::nextafter(b, dir);
        else b = std::nextafter(static_cast<float>(b), static_cast<float>(dir));
    }
    return b;
}

double machine(const RoundingModel& m, Op op, double a, double b) {
    if (m.format == Format::Binary32) {
        float x = static_cast<float>(a), y = static_cast<float>(b);
        switch (op) {
        case Op::Add: return x + y;
        case Op::Sub: return x - y;
        case Op::Mul: return x * y;
        case Op::Div: return x / y;
        default: return std::sqrt(x);
        }
    }
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    default: return std::sqrt(a);
    }
}

struct AuditChunk {
    std::size_t samples = 0, violations = 0;
    std::optional<ExtReal> q_lo, q_hi;  // extremes of computed / exact
    std::string worst;
};

}  // namespace

// |ln q| <= eps iff exp(-eps) <= q <= exp(eps), so the per-sample test is one
// division and two comparisons; logs are taken only for the extremes. Every
// 256th sample is also pushed through rounded_op and must agree.
AuditReport audit_rounding(Op op, std::size_t n, const RoundingModel& m, prec_t prec, std::uint64_t seed,
                           unsigned threads) {
    if (op == Op::Var) throw std::invalid_argument("audit: not an operator");
    const ExtReal eps = eps_value(m, prec);
    const ExtReal lo = exp(-eps), hi = exp(eps);
    const Exponents range = operand_range(op, m);

    // One generator per block keeps results independent of the thread count.
    constexpr std::size_t kBlock = 4096;
    auto run = [&](std::size_t block) {
        AuditChunk c;
        std::seed_seq ss{seed, static_cast<std::uint64_t>(op), static_cast<std::uint64_t>(block)};
        std::mt19937_64 rng(ss);
        for (std::size_t s = block * kBlock; s < std::min(n, (block + 1) * kBlock); ++s) {
            for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
                double a = draw_normal(rng, m, range, op == Op::Sqrt);
                double b = 0;
                if (op != Op::Sqrt) {
                    bool cancel = (op == Op::Add || op == Op::Sub) && rng() % 8 == 0;
                    b = cancel ? near(rng, m, op == Op::Add ? -a : a) : draw_normal(rng, m, range, false);
                }
                double r = machine(m, op, a, b);
                ExtReal exact = exact_op(op, ExtReal(a, prec), ExtReal(b, prec));
                if (!std::isfinite(r)) continue;
                if (exact.is_zero() != (r == 0)) continue;  // underflow: outside the model
                if (r != 0 && std::fabs(r) < m.min_normal && ExtReal(r, prec) != exact) continue;
                ++c.samples;
                ExtReal q = exact.is_zero() ? ExtReal(1.0, prec) : ExtReal(r, prec) / exact;
                if (!c.q_lo || q < *c.q_lo) c.q_lo = q;
                if (!c.q_hi || q > *c.q_hi) c.q_hi = q;
                bool bad = q < lo || q > hi;
                if (s % 256 == 0 && std::fabs(r) >= m.min_normal) {
                    Rounded ro = rounded_op(m, op, a, b, prec);
                    if (ro.value != r || abs(ro.delta) > eps) bad = true;
                }
                if (bad) {
                    ++c.violations;
                    if (c.worst.empty()) {
                        std::ostringstream os;
                        os.precision(17);
                        os << "a = " << a << ", b = " << b << ": |delta| = " << (abs(log(q)) / eps).str(10)
                           << " eps";
                        c.worst = os.str();
                    }
                }
                break;
            }
        }
        return c;
    };

    auto chunks = parallel_map<AuditChunk>((n + kBlock - 1) / kBlock, threads, run);

    AuditReport rep;
    rep.op = op;
    ExtReal worst(prec);
    for (const auto& c : chunks) {
        rep.samples += c.samples;
        rep.violations += c.violations;
        if (rep.worst.empty()) rep.worst = c.worst;
        if (c.q_lo) worst = max(worst, abs(log(*c.q_lo)));
        if (c.q_hi) worst = max(worst, abs(log(*c.q_hi)));
    }
    rep.max_delta_over_eps = (worst / eps).to_double();
    return rep;
}

}  // namespace shel
