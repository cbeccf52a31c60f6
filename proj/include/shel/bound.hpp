#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace shel {

// Nonnegative exact rational, in units of eps.
class Bound {
public:
    Bound() = default;
    Bound(long n);  // NOLINT: integral bounds read naturally as literals
    Bound(long num, long den);
    explicit Bound(const mpq_class& q);

    static Bound parse(std::string_view text);

    const mpq_class& q() const { return q_; }
    bool is_zero() const { return sgn(q_) == 0; }
    double to_double() const { return q_.get_d(); }
    std::string str() const;

    Bound operator+(const Bound& o) const { return Bound(mpq_class(q_ + o.q_)); }
    Bound operator*(const Bound& o) const { return Bound(mpq_class(q_ * o.q_)); }
    Bound operator/(const Bound& o) const;
    // Throws if the result would be negative.
    Bound operator-(const Bound& o) const;
    Bound& operator+=(const Bound& o) { return *this = *this + o; }

    friend bool operator==(const Bound& a, const Bound& b) { return a.q_ == b.q_; }
    friend bool operator!=(const Bound& a, const Bound& b) { return a.q_ != b.q_; }
    friend bool operator<(const Bound& a, const Bound& b) { return a.q_ < b.q_; }
    friend bool operator<=(const Bound& a, const Bound& b) { return a.q_ <= b.q_; }
    friend bool operator>(const Bound& a, const Bound& b) { return a.q_ > b.q_; }
    friend bool operator>=(const Bound& a, const Bound& b) { return a.q_ >= b.q_; }

    std::size_t hash() const;

private:
    mpq_class q_{0};
    void check() const;
};

inline std::ostream& operator<<(std::ostream& os, const Bound& b) { return os << b.str(); }

Bound max(const Bound& a, const Bound& b);

}  // namespace shel

template <>
struct std::hash<shel::Bound> {
    std::size_t operator()(const shel::Bound& b) const { return b.hash(); }
};
