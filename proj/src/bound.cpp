#include "shel/bound.hpp"

#include <stdexcept>

namespace shel {

Bound::Bound(long n) : q_(n) { check(); }

Bound::Bound(long num, long den) {
    if (den == 0) throw std::invalid_argument("bound with zero denominator");
    q_ = mpq_class(num, den);
    q_.canonicalize();
    check();
}

Bound::Bound(const mpq_class& q) : q_(q) {
    q_.canonicalize();
    check();
}

void Bound::check() const {
    if (sgn(q_) < 0) throw std::domain_error("negative bound " + q_.get_str());
}

Bound Bound::parse(std::string_view text) {
    std::string s(text);
    mpq_class q;
    if (s.empty() || q.set_str(s, 10) != 0) throw std::invalid_argument("bad bound literal '" + s + "'");
    if (sgn(q.get_den()) == 0) throw std::invalid_argument("bad bound literal '" + s + "'");
    return Bound(q);
}

std::string Bound::str() const { return q_.get_str(); }

Bound Bound::operator/(const Bound& o) const {
    if (o.is_zero()) throw std::domain_error("bound division by zero");
    return Bound(mpq_class(q_ / o.q_));
}

Bound Bound::operator-(const Bound& o) const { return Bound(mpq_class(q_ - o.q_)); }

std::size_t Bound::hash() const {
    std::size_t h = mpz_get_ui(q_.get_num_mpz_t());
    h = h * 0x9e3779b97f4a7c15ULL ^ mpz_get_ui(q_.get_den_mpz_t());
    return h ^ (static_cast<std::size_t>(mpz_size(q_.get_num_mpz_t())) << 56);
}

Bound max(const Bound& a, const Bound& b) { return a < b ? b : a; }

}  // namespace shel
