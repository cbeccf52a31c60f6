#include "shel/ext_real.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace shel {

ExtReal::ExtReal(prec_t prec) {
    mpfr_init2(v_, prec);
    mpfr_set_zero(v_, 1);
}

ExtReal::ExtReal(double x, prec_t prec) {
    mpfr_init2(v_, prec);
    mpfr_set_d(v_, x, MPFR_RNDN);
}

ExtReal::ExtReal(const mpq_class& q, prec_t prec) {
    mpfr_init2(v_, prec);
    mpfr_set_q(v_, q.get_mpq_t(), MPFR_RNDN);
}

ExtReal::ExtReal(const ExtReal& o) {
    mpfr_init2(v_, o.precision());
    mpfr_set(v_, o.v_, MPFR_RNDN);
}

ExtReal::ExtReal(ExtReal&& o) noexcept {
    mpfr_init2(v_, MPFR_PREC_MIN);
    mpfr_swap(v_, o.v_);
}

ExtReal& ExtReal::operator=(const ExtReal& o) {
    if (this != &o) {
        mpfr_set_prec(v_, o.precision());
        mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
}

ExtReal& ExtReal::operator=(ExtReal&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
}

ExtReal::~ExtReal() { mpfr_clear(v_); }

ExtReal ExtReal::inf(prec_t prec) {
    ExtReal r(prec);
    mpfr_set_inf(r.v_, 1);
    return r;
}

ExtReal ExtReal::pow2(long e, prec_t prec) {
    ExtReal r(prec);
    mpfr_set_ui_2exp(r.v_, 1, e, MPFR_RNDN);
    return r;
}

double ExtReal::log2_abs() const {
    if (is_zero()) return -std::numeric_limits<double>::infinity();
    if (is_inf() || is_nan()) return std::numeric_limits<double>::infinity();
    long e = 0;
    double m = mpfr_get_d_2exp(&e, v_, MPFR_RNDN);
    return std::log2(std::fabs(m)) + static_cast<double>(e);
}

std::string ExtReal::str(int digits) const {
    if (is_nan()) return "nan";
    if (is_inf()) return sign() > 0 ? "inf" : "-inf";
    std::vector<char> buf(static_cast<std::size_t>(digits) + 32);
    mpfr_snprintf(buf.data(), buf.size(), "%.*Rg", digits, v_);
    return buf.data();
}

ExtReal ExtReal::operator-() const {
    ExtReal r(precision());
    mpfr_neg(r.v_, v_, MPFR_RNDN);
    return r;
}

namespace {

template <class F>
ExtReal binop(const ExtReal& a, const ExtReal& b, F f) {
    ExtReal r(std::max(a.precision(), b.precision()));
    f(r.get(), a.get(), b.get(), MPFR_RNDN);
    return r;
}

template <class F>
ExtReal unop(const ExtReal& a, F f) {
    ExtReal r(a.precision());
    f(r.get(), a.get(), MPFR_RNDN);
    return r;
}

}  // namespace

ExtReal operator+(const ExtReal& a, const ExtReal& b) { return binop(a, b, mpfr_add); }
ExtReal operator-(const ExtReal& a, const ExtReal& b) { return binop(a, b, mpfr_sub); }
ExtReal operator*(const ExtReal& a, const ExtReal& b) { return binop(a, b, mpfr_mul); }
ExtReal operator/(const ExtReal& a, const ExtReal& b) { return binop(a, b, mpfr_div); }

ExtReal& ExtReal::operator+=(const ExtReal& o) { return *this = *this + o; }
ExtReal& ExtReal::operator-=(const ExtReal& o) { return *this = *this - o; }
ExtReal& ExtReal::operator*=(const ExtReal& o) { return *this = *this * o; }
ExtReal& ExtReal::operator/=(const ExtReal& o) { return *this = *this / o; }

ExtReal abs(const ExtReal& x) { return unop(x, mpfr_abs); }
ExtReal sqrt(const ExtReal& x) { return unop(x, mpfr_sqrt); }
ExtReal log(const ExtReal& x) { return unop(x, mpfr_log); }
ExtReal exp(const ExtReal& x) { return unop(x, mpfr_exp); }
ExtReal expm1(const ExtReal& x) { return unop(x, mpfr_expm1); }
ExtReal max(const ExtReal& a, const ExtReal& b) { return a < b ? b : a; }

}  // namespace shel
