#include "shel/numerics.hpp"

#include <cfloat>
#include <cmath>

namespace shel {

RoundingModel unit_roundoff(Format f) {
    RoundingModel m;
    m.format = f;
    int t = f == Format::Binary64 ? 53 : 24;
    int emax = f == Format::Binary64 ? 1023 : 127;
    m.precision_bits = t;
    mpz_class two_t = mpz_class(1) << t;
    m.u = mpq_class(1, two_t);
    m.eps = m.u / (1 - m.u);
    // (2 - 2^(1-t)) * 2^emax
    mpz_class maxf = ((mpz_class(1) << t) - 1) << (emax - t + 1);
    m.max_finite = mpq_class(maxf);
    m.min_normal = f == Format::Binary64 ? DBL_MIN : static_cast<double>(FLT_MIN);
    return m;
}

Format parse_format(const std::string& name) {
    if (name == "binary64" || name == "double") return Format::Binary64;
    if (name == "binary32" || name == "float") return Format::Binary32;
    throw std::invalid_argument("unsupported format '" + name + "'");
}

const char* format_name(Format f) { return f == Format::Binary64 ? "binary64" : "binary32"; }

EvalError::EvalError(std::size_t site, const std::string& msg)
    : std::runtime_error(site == kNoSite ? msg : "site " + std::to_string(site) + ": " + msg), site_(site) {}

bool representable(const RoundingModel& m, double x) {
    if (m.format == Format::Binary64) return true;
    return static_cast<double>(static_cast<float>(x)) == x || std::isnan(x);
}

ExtReal exact_op(Op op, const ExtReal& a, const ExtReal& b, const EvalOptions& opt) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div:
        if (b.is_zero()) throw EvalError(EvalError::kNoSite, "division by zero");
        return a / b;
    case Op::Sqrt:
        if (a.sign() < 0 && opt.strict_sqrt) throw EvalError(EvalError::kNoSite, "sqrt of negative argument");
        return sqrt(abs(a));
    case Op::Var: break;
    }
    throw std::logic_error("exact_op on a variable");
}

namespace {

double machine_op(Format f, Op op, double a, double b) {
    if (f == Format::Binary64) {
        switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
        case Op::Sqrt: return std::sqrt(std::fabs(a));
        case Op::Var: break;
        }
    } else {
        float x = static_cast<float>(a), y = static_cast<float>(b);
        switch (op) {
        case Op::Add: return static_cast<double>(x + y);
        case Op::Sub: return static_cast<double>(x - y);
        case Op::Mul: return static_cast<double>(x * y);
        case Op::Div: return static_cast<double>(x / y);
        case Op::Sqrt: return static_cast<double>(std::sqrt(std::fabs(x)));
        case Op::Var: break;
        }
    }
    throw std::logic_error("machine_op on a variable");
}

void check_site_result(const RoundingModel& m, double r, std::size_t site) {
    if (std::isnan(r)) throw EvalError(site, "NaN result");
    if (std::isinf(r)) throw EvalError(site, "overflow");
    if (r == 0) throw EvalError(site, "zero result at rounding site");
    if (std::fabs(r) < m.min_normal) throw EvalError(site, "subnormal result");
}

void check_operand(const RoundingModel& m, double x, std::size_t site) {
    if (!std::isfinite(x)) throw EvalError(site, "non-finite operand");
    if (!representable(m, x)) throw EvalError(site, "operand not representable in format");
}

}  // namespace

Rounded rounded_op(const RoundingModel& m, Op op, double a, double b, prec_t prec, const EvalOptions& opt,
                   std::size_t site) {
    check_operand(m, a, site);
    if (op != Op::Sqrt) check_operand(m, b, site);
    if (op == Op::Div && b == 0) throw EvalError(site, "division by zero");
    if (op == Op::Sqrt && a < 0 && opt.strict_sqrt) throw EvalError(site, "sqrt of negative argument");
    double r = machine_op(m.format, op, a, b);
    check_site_result(m, r, site);
    ExtReal exact = exact_op(op, ExtReal(a, prec), ExtReal(b, prec), opt);
    return {r, log(ExtReal(r, prec) / exact)};
}

Rounded rounded_log(const RoundingModel& m, double a, prec_t prec, std::size_t site) {
    check_operand(m, a, site);
    if (a <= 0) throw EvalError(site, "log of nonpositive argument");
    mpfr_t t;
    mpfr_init2(t, m.precision_bits);
    mpfr_set_d(t, a, MPFR_RNDN);
    mpfr_log(t, t, MPFR_RNDN);
    double r = mpfr_get_d(t, MPFR_RNDN);
    mpfr_clear(t);
    check_site_result(m, r, site);
    ExtReal exact = log(ExtReal(a, prec));
    return {r, log(ExtReal(r, prec) / exact)};
}

namespace {

template <class Lookup>
ExtReal eval_real_impl(const Expr& e, const Lookup& lookup, prec_t prec, const EvalOptions& opt) {
    if (e.op() == Op::Var) return lookup(e.name());
    ExtReal a = eval_real_impl(e.lhs(), lookup, prec, opt);
    if (e.op() == Op::Sqrt) return exact_op(Op::Sqrt, a, a, opt);
    ExtReal b = eval_real_impl(e.rhs(), lookup, prec, opt);
    return exact_op(e.op(), a, b, opt);
}

double eval_float_impl(const Expr& e, const Valuation& v, const RoundingModel& m, prec_t prec,
                       const EvalOptions& opt, DeltaLog& log_out, std::size_t& site) {
    if (e.op() == Op::Var) {
        auto it = v.find(e.name());
        if (it == v.end()) throw EvalError(EvalError::kNoSite, "unbound variable '" + e.name() + "'");
        check_operand(m, it->second, EvalError::kNoSite);
        return it->second;
    }
    double a = eval_float_impl(e.lhs(), v, m, prec, opt, log_out, site);
    double b = e.op() == Op::Sqrt ? 0.0 : eval_float_impl(e.rhs(), v, m, prec, opt, log_out, site);
    std::size_t here = site++;
    Rounded r = rounded_op(m, e.op(), a, b, prec, opt, here);
    log_out.push_back({here, e.op(), std::move(r.delta)});
    return r.value;
}

}  // namespace

ExtReal eval_real(const Expr& e, const Valuation& v, prec_t prec, const EvalOptions& opt) {
    return eval_real_impl(
        e,
        [&](const std::string& name) {
            auto it = v.find(name);
            if (it == v.end()) throw EvalError(EvalError::kNoSite, "unbound variable '" + name + "'");
            return ExtReal(it->second, prec);
        },
        prec, opt);
}

ExtReal eval_real(const Expr& e, const RealValuation& v, prec_t prec, const EvalOptions& opt) {
    return eval_real_impl(
        e,
        [&](const std::string& name) {
            auto it = v.find(name);
            if (it == v.end()) throw EvalError(EvalError::kNoSite, "unbound variable '" + name + "'");
            ExtReal x(prec);
            mpfr_set(x.get(), it->second.get(), MPFR_RNDN);
            return x;
        },
        prec, opt);
}

FloatEval eval_float(const Expr& e, const Valuation& v, const RoundingModel& m, prec_t prec, const EvalOptions& opt) {
    FloatEval out;
    std::size_t site = 0;
    out.value = eval_float_impl(e, v, m, prec, opt, out.deltas, site);
    return out;
}

ExtReal rp_distance(const ExtReal& x, const ExtReal& y) {
    prec_t p = std::max(x.precision(), y.precision());
    if (x.is_zero() && y.is_zero()) return ExtReal(p);
    if (x.is_zero() || y.is_zero() || x.sign() != y.sign()) return ExtReal::inf(p);
    // ordered so that rp_distance(x, y) and rp_distance(y, x) round identically
    return abs(x) >= abs(y) ? log(x / y) : log(y / x);
}

ExtReal eps_value(const RoundingModel& m, prec_t prec) { return ExtReal(m.eps, prec); }

}  // namespace shel
