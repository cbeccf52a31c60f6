#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <ostream>
#include <string>

namespace shel {

using prec_t = mpfr_prec_t;
inline constexpr prec_t kDefaultPrecision = 256;

// MPFR value with its own precision. Binary operations round to the larger
// operand precision, to nearest.
class ExtReal {
public:
    explicit ExtReal(prec_t prec = kDefaultPrecision);
    ExtReal(double x, prec_t prec);
    ExtReal(const mpq_class& q, prec_t prec);
    ExtReal(const ExtReal& o);
    ExtReal(ExtReal&& o) noexcept;
    ExtReal& operator=(const ExtReal& o);
    ExtReal& operator=(ExtReal&& o) noexcept;
    ~ExtReal();

    static ExtReal inf(prec_t prec);
    static ExtReal pow2(long e, prec_t prec);

    prec_t precision() const { return mpfr_get_prec(v_); }
    mpfr_srcptr get() const { return v_; }
    mpfr_ptr get() { return v_; }

    bool is_zero() const { return mpfr_zero_p(v_) != 0; }
    bool is_inf() const { return mpfr_inf_p(v_) != 0; }
    bool is_nan() const { return mpfr_nan_p(v_) != 0; }
    int sign() const { return mpfr_sgn(v_); }
    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
    // Base-2 exponent estimate of |x|, for reporting; -inf for zero.
    double log2_abs() const;
    std::string str(int digits = 20) const;

    ExtReal operator-() const;
    ExtReal& operator+=(const ExtReal& o);
    ExtReal& operator-=(const ExtReal& o);
    ExtReal& operator*=(const ExtReal& o);
    ExtReal& operator/=(const ExtReal& o);

    friend ExtReal operator+(const ExtReal& a, const ExtReal& b);
    friend ExtReal operator-(const ExtReal& a, const ExtReal& b);
    friend ExtReal operator*(const ExtReal& a, const ExtReal& b);
    friend ExtReal operator/(const ExtReal& a, const ExtReal& b);

    friend bool operator<(const ExtReal& a, const ExtReal& b) { return mpfr_less_p(a.v_, b.v_) != 0; }
    friend bool operator<=(const ExtReal& a, const ExtReal& b) { return mpfr_lessequal_p(a.v_, b.v_) != 0; }
    friend bool operator>(const ExtReal& a, const ExtReal& b) { return mpfr_greater_p(a.v_, b.v_) != 0; }
    friend bool operator>=(const ExtReal& a, const ExtReal& b) { return mpfr_greaterequal_p(a.v_, b.v_) != 0; }
    friend bool operator==(const ExtReal& a, const ExtReal& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
    friend bool operator!=(const ExtReal& a, const ExtReal& b) { return !(a == b); }

private:
    mpfr_t v_;
};

ExtReal abs(const ExtReal& x);
ExtReal sqrt(const ExtReal& x);
ExtReal log(const ExtReal& x);
ExtReal exp(const ExtReal& x);
ExtReal expm1(const ExtReal& x);
ExtReal max(const ExtReal& a, const ExtReal& b);

inline std::ostream& operator<<(std::ostream& os, const ExtReal& x) { return os << x.str(); }

}  // namespace shel
