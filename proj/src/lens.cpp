#include "shel/lens.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shel {

using detail::Affine;
using detail::Env;
using detail::LensNode;
using detail::Trace;

namespace {

// ---- small exact linear algebra ------------------------------------------

RatMatrix to_rat(const IntMatrix& m) {
    RatMatrix r(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (long v : m[i]) r[i].emplace_back(v);
    return r;
}

RatMatrix matmul(const RatMatrix& a, const RatMatrix& b, std::size_t inner, std::size_t cols) {
    RatMatrix r(a.size(), RatVec(cols, 0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < inner; ++k) {
            if (sgn(a[i][k]) == 0) continue;
            for (std::size_t j = 0; j < cols; ++j) r[i][j] += a[i][k] * b[k][j];
        }
    return r;
}

RatVec matvec(const IntMatrix& a, const RatVec& v) {
    RatVec r(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            if (a[i][j] != 0) r[i] += a[i][j] * v[j];
    return r;
}

// Exact solution of a w = r, or nullopt if inconsistent. Free variables
// (never happens for object action matrices) are set to zero.
std::optional<RatVec> solve(const IntMatrix& a, const RatVec& r, std::size_t cols) {
    std::size_t rows = a.size();
    RatMatrix m(rows, RatVec(cols + 1, 0));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m[i][j] = a[i][j];
        m[i][cols] = r[i];
    }
    std::vector<std::size_t> pivot_col;
    std::size_t row = 0;
    for (std::size_t c = 0; c < cols && row < rows; ++c) {
        std::size_t p = row;
        while (p < rows && sgn(m[p][c]) == 0) ++p;
        if (p == rows) continue;
        std::swap(m[p], m[row]);
        mpq_class inv = 1 / m[row][c];
        for (auto& x : m[row]) x *= inv;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == row || sgn(m[i][c]) == 0) continue;
            mpq_class f = m[i][c];
            for (std::size_t j = 0; j <= cols; ++j) m[i][j] -= f * m[row][j];
        }
        pivot_col.push_back(c);
        ++row;
    }
    for (std::size_t i = row; i < rows; ++i)
        if (sgn(m[i][cols]) != 0) return std::nullopt;
    RatVec w(cols, 0);
    for (std::size_t i = 0; i < pivot_col.size(); ++i) w[pivot_col[i]] = m[i][cols];
    return w;
}

ExtReal rat_times(const mpq_class& c, const ExtReal& x) {
    if (c == 1) return x;
    return ExtReal(c, x.precision()) * x;
}

std::string bstr(const Bound& b) { return b.str(); }

const ExtReal& zero_delta(prec_t prec) {
    thread_local ExtReal z(kDefaultPrecision);
    if (z.precision() != prec) z = ExtReal(prec);
    return z;
}

// ---- primitives -----------------------------------------------------------

class ArithLens final : public LensNode {
public:
    ArithLens(Op op, Bound p, Bound src_bound)
        : LensNode(ShelObject::base(2, std::move(src_bound)), ShelObject::base(1, p)), op_(op), p_(std::move(p)) {}

    std::string name() const override { return op_ == Op::Add ? "add" : op_ == Op::Sub ? "sub" : "mul"; }
    std::string describe() const override { return name() + "[p=" + bstr(p_) + "]"; }

    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        return {exact_op(op_, x[0], x[1])};
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        Rounded r = rounded_op(env.model, op_, x[0], x[1], env.prec, env.opt);
        tr.deltas = {std::move(r.delta)};
        return {r.value};
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t) const override {
        ExtReal s = t[0] + tr.deltas[0];
        if (op_ == Op::Mul) s = s * ExtReal(0.5, s.precision());
        return {s};
    }
    std::optional<Affine> affine() const override {
        return Affine{{{op_ == Op::Mul ? mpq_class(1, 2) : mpq_class(1)}}, {true}};
    }
    std::optional<RatVec> transport(const RatVec& v) const override {
        return RatVec{op_ == Op::Mul ? mpq_class(2 * v[0]) : v[0]};
    }

private:
    Op op_;
    Bound p_;
};

class DivLens final : public LensNode {
public:
    explicit DivLens(Bound p)
        : LensNode(ShelObject::tensor(ShelObject::base(1, p + 1), ShelObject::base(1, 0)), ShelObject::base(1, p)),
          p_(std::move(p)) {}

    std::string name() const override { return "div"; }
    std::string describe() const override { return "div[p=" + bstr(p_) + "]"; }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        if (x[1].is_zero()) return {ExtReal(x[0].precision())};
        return {x[0] / x[1]};
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        if (x[1] == 0) {
            tr.deltas = {ExtReal(env.prec)};
            return {0.0};
        }
        Rounded r = rounded_op(env.model, Op::Div, x[0], x[1], env.prec, env.opt);
        tr.deltas = {std::move(r.delta)};
        return {r.value};
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t prec) const override {
        return {t[0] + tr.deltas[0], ExtReal(prec)};
    }
    std::optional<Affine> affine() const override { return Affine{{{1}, {0}}, {true, false}}; }
    std::optional<RatVec> transport(const RatVec& v) const override { return RatVec{v[0] - v[1]}; }

private:
    Bound p_;
};

class SqrtLens final : public LensNode {
public:
    explicit SqrtLens(Bound p) : LensNode(ShelObject::base(1, Bound(2) * p + 2), ShelObject::base(1, p)), p_(p) {}

    std::string name() const override { return "sqrt"; }
    std::string describe() const override { return "sqrt[p=" + bstr(p_) + "]"; }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        return {exact_op(Op::Sqrt, x[0], x[0])};
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        Rounded r = rounded_op(env.model, Op::Sqrt, x[0], 0.0, env.prec, env.opt);
        tr.deltas = {std::move(r.delta)};
        return {r.value};
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t) const override {
        ExtReal two(2.0, t[0].precision());
        return {two * (t[0] + tr.deltas[0])};
    }
    std::optional<Affine> affine() const override { return Affine{{{2}}, {true}}; }
    std::optional<RatVec> transport(const RatVec& v) const override { return RatVec{mpq_class(v[0] / 2)}; }

private:
    Bound p_;
};

class LogLens final : public LensNode {
public:
    LogLens(Bound p, const RoundingModel& m)
        : LensNode(ShelObject::base(1, Bound(mpq_class(3 * m.max_finite)) * (p + 1)), ShelObject::base(1, p)),
          p_(std::move(p)),
          max_finite_(m.max_finite) {
        if (p_.q() * m.eps > 1) throw LensError("log lens needs p*eps <= 1");
    }

    std::string name() const override { return "log"; }
    std::string describe() const override { return "log[p=" + bstr(p_) + "]"; }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        if (x[0].sign() <= 0) throw EvalError(EvalError::kNoSite, "log of nonpositive argument");
        return {log(x[0])};
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        if (x[0] < 1 || mpq_class(x[0]) > max_finite_) throw EvalError(EvalError::kNoSite, "log input outside [1, a]");
        Rounded r = rounded_log(env.model, x[0], env.prec);
        tr.in = x;
        tr.deltas = {std::move(r.delta)};
        return {r.value};
    }
    // witness exp(ln(x) e^(delta+t)) written as a shift on x
    Shift backward(const Shift& t, const Trace& tr, prec_t prec) const override {
        ExtReal lx = log(ExtReal(tr.in[0], prec));
        return {lx * expm1(t[0] + tr.deltas[0])};
    }
    std::optional<Affine> affine() const override { return std::nullopt; }
    std::optional<RatVec> transport(const RatVec& v) const override {
        if (sgn(v[0]) == 0) return RatVec{0};
        return std::nullopt;
    }

private:
    Bound p_;
    mpq_class max_finite_;
};

class DMulLens final : public LensNode {
public:
    DMulLens(long n, Bound p, Bound q, std::size_t k, std::size_t idx)
        : LensNode(ShelObject::star(ShelObject::base(k, p), ShelObject::base(1, q + 1), n),
                   ShelObject::star(ShelObject::base(k, p), ShelObject::base(1, q), n + 1)),
          n_(n),
          p_(std::move(p)),
          q_(std::move(q)),
          idx_(idx) {}

    std::string name() const override { return "dmul:" + std::to_string(n_); }
    std::string describe() const override {
        return name() + "[p=" + bstr(p_) + ",q=" + bstr(q_) + (source().left().arity() > 1 ? ",root=" + std::to_string(idx_) : "") + "]";
    }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        std::vector<ExtReal> out(x.begin(), x.end() - 1);
        out.push_back(x[idx_] * x.back());
        return out;
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        Rounded r = rounded_op(env.model, Op::Mul, x[idx_], x.back(), env.prec, env.opt);
        tr.deltas = {std::move(r.delta)};
        std::vector<double> out(x.begin(), x.end() - 1);
        out.push_back(r.value);
        return out;
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t) const override { return {t[0], t[1] + tr.deltas[0]}; }
    std::optional<Affine> affine() const override { return Affine{{{1, 0}, {0, 1}}, {false, true}}; }
    std::optional<RatVec> transport(const RatVec& v) const override { return v; }

private:
    long n_;
    Bound p_, q_;
    std::size_t idx_;
};

class AddDivLens final : public LensNode {
public:
    AddDivLens(Bound p1, Bound p2, long i)
        : LensNode(ShelObject::star(ShelObject::base(2, p1), ShelObject::base(1, p2 + 2), i), ShelObject::base(1, p2)),
          p1_(std::move(p1)),
          p2_(std::move(p2)),
          i_(i) {}

    std::string name() const override { return "adddiv"; }
    std::string describe() const override {
        return "adddiv[p1=" + bstr(p1_) + ",p2=" + bstr(p2_) + ",i=" + std::to_string(i_) + "]";
    }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        ExtReal s = x[0] + x[1];
        if (s.is_zero()) return {ExtReal(x[0].precision())};
        return {x[2] / s};
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        if (x[0] == -x[1]) {
            tr.deltas = {ExtReal(env.prec), ExtReal(env.prec)};
            return {0.0};
        }
        Rounded s = rounded_op(env.model, Op::Add, x[0], x[1], env.prec, env.opt);
        Rounded d = rounded_op(env.model, Op::Div, x[2], s.value, env.prec, env.opt);
        tr.deltas = {std::move(s.delta), std::move(d.delta)};
        return {d.value};
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t prec) const override {
        return {ExtReal(prec), t[0] + tr.deltas[1] - tr.deltas[0]};
    }
    std::optional<Affine> affine() const override { return Affine{{{0}, {1}}, {false, true}}; }
    std::optional<RatVec> transport(const RatVec& v) const override {
        return RatVec{mpq_class((i_ - 1) * v[0] + v[1])};
    }

private:
    Bound p1_, p2_;
    long i_;
};

// ---- structural -----------------------------------------------------------

// Forward map selects values; backward map is an integer matrix. Both
// morphism conditions are verified exactly on construction.
class LinearLens final : public LensNode {
public:
    LinearLens(std::string label, ShelObject src, ShelObject tgt, std::vector<std::size_t> vmap, IntMatrix b)
        : LensNode(std::move(src), std::move(tgt)), label_(std::move(label)), vmap_(std::move(vmap)), b_(std::move(b)) {
        validate();
    }

    std::string name() const override { return label_; }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        std::vector<ExtReal> out;
        out.reserve(vmap_.size());
        for (auto i : vmap_) out.push_back(x[i]);
        return out;
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env&, Trace&) const override {
        std::vector<double> out;
        out.reserve(vmap_.size());
        for (auto i : vmap_) out.push_back(x[i]);
        return out;
    }
    Shift backward(const Shift& t, const Trace&, prec_t prec) const override {
        Shift out;
        out.reserve(b_.size());
        for (const auto& row : b_) {
            ExtReal s(prec);
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (row[k] == 0) continue;
                if (row[k] == 1) s += t[k];
                else s += ExtReal(static_cast<double>(row[k]), prec) * t[k];
            }
            out.push_back(std::move(s));
        }
        return out;
    }
    std::optional<Affine> affine() const override { return Affine{to_rat(b_), std::vector<bool>(b_.size(), false)}; }
    std::optional<RatVec> transport(const RatVec& v) const override {
        RatVec seen = matvec(source().action(), v);
        RatVec r;
        r.reserve(vmap_.size());
        for (auto i : vmap_) r.push_back(seen[i]);
        return solve(target().action(), r, target().dims());
    }

private:
    std::string label_;
    std::vector<std::size_t> vmap_;
    IntMatrix b_;

    void validate() const {
        const ShelObject& s = source();
        const ShelObject& t = target();
        if (vmap_.size() != t.arity()) throw LensError(label_ + ": value map size mismatch");
        for (auto i : vmap_)
            if (i >= s.arity()) throw LensError(label_ + ": value map out of range");
        if (b_.size() != s.dims()) throw LensError(label_ + ": backward matrix row count mismatch");
        for (const auto& row : b_)
            if (row.size() != t.dims()) throw LensError(label_ + ": backward matrix column count mismatch");
        // exactness: f(x * Bt) = f(x) * t  <=>  action_src[vmap[i]] * B = action_tgt[i]
        for (std::size_t i = 0; i < t.arity(); ++i) {
            const auto& srow = s.action()[vmap_[i]];
            for (std::size_t k = 0; k < t.dims(); ++k) {
                long c = 0;
                for (std::size_t j = 0; j < s.dims(); ++j) c += srow[j] * b_[j][k];
                if (c != t.action()[i][k])
                    throw LensError(label_ + ": shift actions incompatible at target value " + std::to_string(i));
            }
        }
        // bound: |(Bt)_j| <= sum_k |B_jk| q_k <= p_j
        for (std::size_t j = 0; j < s.dims(); ++j) {
            Bound need;
            for (std::size_t k = 0; k < t.dims(); ++k)
                if (b_[j][k] != 0) need += Bound(std::labs(b_[j][k])) * t.bounds()[k];
            if (need > s.bounds()[j])
                throw LensError(label_ + ": source bound " + s.bounds()[j].str() + " on dim " + std::to_string(j) +
                                " is below required " + need.str());
        }
    }
};

// ---- combinators ----------------------------------------------------------

class ComposeLens final : public LensNode {
public:
    ComposeLens(LensSpec a, LensSpec b) : LensNode(a.source(), b.target()), a_(std::move(a)), b_(std::move(b)) {
        if (a_.target() != b_.source())
            throw LensError("compose: " + a_.target().str() + " does not match " + b_.source().str());
    }

    std::string name() const override { return "compose"; }
    std::string describe() const override { return a_.describe() + " ; " + b_.describe(); }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        return b_.node().forward_exact(a_.node().forward_exact(x));
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        tr.kids.resize(2);
        auto mid = a_.node().forward_float(x, env, tr.kids[0]);
        return b_.node().forward_float(mid, env, tr.kids[1]);
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t prec) const override {
        return a_.node().backward(b_.node().backward(t, tr.kids[1], prec), tr.kids[0], prec);
    }
    std::optional<Affine> affine() const override {
        auto fa = a_.node().affine(), fb = b_.node().affine();
        if (!fa || !fb) return std::nullopt;
        Affine r;
        r.a = matmul(fa->a, fb->a, a_.target().dims(), b_.target().dims());
        r.offset = fa->offset;
        for (std::size_t i = 0; i < r.offset.size(); ++i)
            for (std::size_t j = 0; j < fb->offset.size(); ++j)
                if (fb->offset[j] && sgn(fa->a[i][j]) != 0) r.offset[i] = true;
        return r;
    }
    std::optional<RatVec> transport(const RatVec& v) const override {
        auto w = a_.node().transport(v);
        if (!w) return std::nullopt;
        return b_.node().transport(*w);
    }

private:
    LensSpec a_, b_;
};

Affine block_diag(const Affine& a, std::size_t a_cols, const Affine& b, std::size_t b_cols) {
    Affine r;
    for (const auto& row : a.a) {
        RatVec x = row;
        x.resize(a_cols + b_cols, 0);
        r.a.push_back(std::move(x));
    }
    for (const auto& row : b.a) {
        RatVec x(a_cols, 0);
        x.insert(x.end(), row.begin(), row.end());
        r.a.push_back(std::move(x));
    }
    r.offset = a.offset;
    r.offset.insert(r.offset.end(), b.offset.begin(), b.offset.end());
    return r;
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& v, std::size_t k) {
    return {std::vector<T>(v.begin(), v.begin() + static_cast<long>(k)),
            std::vector<T>(v.begin() + static_cast<long>(k), v.end())};
}

class PairLens : public LensNode {
public:
    PairLens(ShelObject src, ShelObject tgt, LensSpec a, LensSpec b)
        : LensNode(std::move(src), std::move(tgt)), a_(std::move(a)), b_(std::move(b)) {}

    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        auto [xa, xb] = split(x, a_.source().arity());
        auto ya = a_.node().forward_exact(xa);
        auto yb = b_.node().forward_exact(xb);
        ya.insert(ya.end(), yb.begin(), yb.end());
        return ya;
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        tr.kids.resize(2);
        auto [xa, xb] = split(x, a_.source().arity());
        auto ya = a_.node().forward_float(xa, env, tr.kids[0]);
        auto yb = b_.node().forward_float(xb, env, tr.kids[1]);
        ya.insert(ya.end(), yb.begin(), yb.end());
        return ya;
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t prec) const override {
        auto [ta, tb] = split(t, a_.target().dims());
        auto sa = a_.node().backward(ta, tr.kids[0], prec);
        auto sb = b_.node().backward(tb, tr.kids[1], prec);
        sa.insert(sa.end(), sb.begin(), sb.end());
        return sa;
    }
    std::optional<Affine> affine() const override {
        auto fa = a_.node().affine(), fb = b_.node().affine();
        if (!fa || !fb) return std::nullopt;
        return block_diag(*fa, a_.target().dims(), *fb, b_.target().dims());
    }

protected:
    LensSpec a_, b_;
};

class ParallelLens final : public PairLens {
public:
    ParallelLens(LensSpec a, LensSpec b)
        : PairLens(ShelObject::tensor(a.source(), b.source()), ShelObject::tensor(a.target(), b.target()), a, b) {}

    std::string name() const override { return "parallel"; }
    std::string describe() const override { return "(" + a_.describe() + " x " + b_.describe() + ")"; }
    std::optional<RatVec> transport(const RatVec& v) const override {
        auto [va, vb] = split(v, a_.source().dims());
        auto wa = a_.node().transport(va);
        auto wb = b_.node().transport(vb);
        if (!wa || !wb) return std::nullopt;
        wa->insert(wa->end(), wb->begin(), wb->end());
        return wa;
    }
};

class ParallelStarLens final : public PairLens {
public:
    ParallelStarLens(LensSpec a, LensSpec b, IntMatrix hom, IntMatrix thom)
        : PairLens(ShelObject::star(a.source(), b.source(), hom), ShelObject::star(a.target(), b.target(), thom), a,
                   b),
          hom_(std::move(hom)),
          thom_(std::move(thom)) {}

    std::string name() const override { return "parallel_star"; }
    std::string describe() const override { return "(" + a_.describe() + " * " + b_.describe() + ")"; }
    std::optional<RatVec> transport(const RatVec& v) const override {
        auto [va, vb] = split(v, a_.source().dims());
        auto wa = a_.node().transport(va);
        if (!wa) return std::nullopt;
        RatVec eff = matvec(hom_, va);
        for (std::size_t i = 0; i < eff.size(); ++i) eff[i] += vb[i];
        auto ub = b_.node().transport(eff);
        if (!ub) return std::nullopt;
        RatVec push = matvec(thom_, *wa);
        for (std::size_t i = 0; i < ub->size(); ++i) (*ub)[i] -= push[i];
        wa->insert(wa->end(), ub->begin(), ub->end());
        return wa;
    }

private:
    IntMatrix hom_, thom_;
};

class RelabelLens final : public LensNode {
public:
    RelabelLens(LensSpec inner, ShelObject src) : LensNode(std::move(src), inner.target()), in_(std::move(inner)) {}
    std::string name() const override { return in_.name(); }
    std::string describe() const override { return in_.describe() + "{relabeled}"; }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const override {
        return in_.node().forward_exact(x);
    }
    std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const override {
        return in_.node().forward_float(x, env, tr);
    }
    Shift backward(const Shift& t, const Trace& tr, prec_t prec) const override {
        return in_.node().backward(t, tr, prec);
    }
    std::optional<Affine> affine() const override { return in_.node().affine(); }
    std::optional<RatVec> transport(const RatVec& v) const override { return in_.node().transport(v); }

private:
    LensSpec in_;
};

template <class T, class... A>
LensSpec make(A&&... a) {
    return LensSpec(std::make_shared<const T>(std::forward<A>(a)...));
}

IntMatrix identity(std::size_t n) {
    IntMatrix m(n, std::vector<long>(n, 0));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1;
    return m;
}

std::vector<std::size_t> iota(std::size_t n, std::size_t from = 0) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = from + i;
    return v;
}

void require_base(const ShelObject& o, const char* who) {
    if (o.kind() != ShelObject::Kind::Base) throw LensError(std::string(who) + ": expected a base object");
}

}  // namespace

std::vector<ExtReal> LensSpec::forward_exact(const std::vector<ExtReal>& x) const {
    if (x.size() != source().arity()) throw LensError("forward_exact: arity mismatch");
    return n_->forward_exact(x);
}

LensSpec lens_add(const Bound& p) { return make<ArithLens>(Op::Add, p, p + 1); }
LensSpec lens_sub(const Bound& p) { return make<ArithLens>(Op::Sub, p, p + 1); }
LensSpec lens_mul(const Bound& p) { return make<ArithLens>(Op::Mul, p, (p + 1) / Bound(2)); }
LensSpec lens_div(const Bound& p) { return make<DivLens>(p); }
LensSpec lens_sqrt(const Bound& p) { return make<SqrtLens>(p); }
LensSpec lens_log(const Bound& p, const RoundingModel& m) { return make<LogLens>(p, m); }

LensSpec lens_dmul(long n, const Bound& p, const Bound& q, std::size_t root_arity, std::size_t root_index) {
    if (n < 0) throw LensError("dmul: negative scale");
    if (root_index >= root_arity) throw LensError("dmul: root index out of range");
    return make<DMulLens>(n, p, q, root_arity, root_index);
}

LensSpec lens_adddiv(const Bound& p1, const Bound& p2, long i) {
    if (i < 0) throw LensError("adddiv: negative scale");
    return make<AddDivLens>(p1, p2, i);
}

LensSpec lens_id(const ShelObject& x) { return make<LinearLens>("id", x, x, iota(x.arity()), identity(x.dims())); }

LensSpec lens_weaken(const ShelObject& src, const ShelObject& tgt) {
    if (!src.same_shape(tgt)) throw LensError("weaken: shapes differ");
    return make<LinearLens>("weaken", src, tgt, iota(src.arity()), identity(src.dims()));
}

LensSpec lens_dup(const Bound& p, std::size_t arity) {
    auto vmap = iota(arity);
    auto again = iota(arity);
    vmap.insert(vmap.end(), again.begin(), again.end());
    return make<LinearLens>("dup", ShelObject::base(arity, p), ShelObject::base(2 * arity, p), vmap, IntMatrix{{1}});
}

LensSpec lens_share_tensor(const ShelObject& a, const ShelObject& b) {
    require_base(a, "share_tensor");
    require_base(b, "share_tensor");
    if (a.bound() != b.bound())
        throw LensError("share_tensor: bounds differ (" + a.bound().str() + " vs " + b.bound().str() + ")");
    return make<LinearLens>("share_tensor", ShelObject::tensor(a, b), ShelObject::base(a.arity() + b.arity(), a.bound()),
                            iota(a.arity() + b.arity()), IntMatrix{{1}, {1}});
}

LensSpec lens_share_star(long n, const ShelObject& root, const ShelObject& dep) {
    require_base(root, "share_star");
    require_base(dep, "share_star");
    Bound need = Bound(std::labs(n - 1)) * root.bound();
    if (dep.bound() < need)
        throw LensError("share_star: dependent bound " + dep.bound().str() + " is below |n-1|*p = " + need.str());
    return make<LinearLens>("share_star:" + std::to_string(n), ShelObject::star(root, dep, n),
                            ShelObject::base(root.arity() + dep.arity(), root.bound()), iota(root.arity() + dep.arity()),
                            IntMatrix{{1}, {1 - n}});
}

LensSpec lens_push(long i, long j, const ShelObject& root, const ShelObject& dep) {
    if (root.dims() != 1) throw LensError("push: root must have one shift dimension");
    if (i < 0 || j < 0) throw LensError("push: negative scale");
    Bound cost = Bound(std::labs(i - j)) * root.bound();
    std::vector<Bound> sb = dep.bounds();
    for (auto& b : sb) b += cost;
    ShelObject src = ShelObject::star(root, dep.with_bounds(sb), i);
    ShelObject tgt = ShelObject::star(root, dep, j);
    IntMatrix b = identity(1 + dep.dims());
    for (std::size_t d = 0; d < dep.dims(); ++d) b[1 + d][0] = j - i;
    return make<LinearLens>("push:" + std::to_string(i) + "->" + std::to_string(j), src, tgt, iota(src.arity()), b);
}

LensSpec lens_proj1(const ShelObject& star) {
    if (star.kind() != ShelObject::Kind::Star && star.kind() != ShelObject::Kind::Tensor)
        throw LensError("proj1: expected a star or tensor");
    const ShelObject& r = star.left();
    IntMatrix b(star.dims(), std::vector<long>(r.dims(), 0));
    for (std::size_t i = 0; i < r.dims(); ++i) b[i][i] = 1;
    return make<LinearLens>("proj1", star, r, iota(r.arity()), b);
}

LensSpec lens_proj2(const ShelObject& star) {
    if (star.kind() != ShelObject::Kind::Star && star.kind() != ShelObject::Kind::Tensor)
        throw LensError("proj2: expected a star or tensor");
    const ShelObject& r = star.left();
    const ShelObject& d = star.right();
    IntMatrix b(star.dims(), std::vector<long>(d.dims(), 0));
    for (std::size_t i = 0; i < d.dims(); ++i) b[r.dims() + i][i] = 1;
    return make<LinearLens>("proj2", star, d, iota(d.arity(), r.arity()), b);
}

LensSpec lens_dist(const ShelObject& a, const ShelObject& b) {
    auto parts = [](const ShelObject& s) {
        if (s.kind() == ShelObject::Kind::Star) return std::make_pair(s.left(), s.right());
        if (s.kind() == ShelObject::Kind::Tensor) return std::make_pair(s.left(), s.right());
        throw LensError("dist: expected star operands");
    };
    auto [x1, y1] = parts(a);
    auto [x2, y2] = parts(b);
    auto hom_of = [](const ShelObject& s, std::size_t rows, std::size_t cols) {
        return s.kind() == ShelObject::Kind::Star ? s.hom() : IntMatrix(rows, std::vector<long>(cols, 0));
    };
    IntMatrix h1 = hom_of(a, y1.dims(), x1.dims()), h2 = hom_of(b, y2.dims(), x2.dims());
    IntMatrix h(y1.dims() + y2.dims(), std::vector<long>(x1.dims() + x2.dims(), 0));
    for (std::size_t i = 0; i < y1.dims(); ++i)
        for (std::size_t j = 0; j < x1.dims(); ++j) h[i][j] = h1[i][j];
    for (std::size_t i = 0; i < y2.dims(); ++i)
        for (std::size_t j = 0; j < x2.dims(); ++j) h[y1.dims() + i][x1.dims() + j] = h2[i][j];
    ShelObject src = ShelObject::tensor(a, b);
    ShelObject tgt = ShelObject::star(ShelObject::tensor(x1, x2), ShelObject::tensor(y1, y2), h);
    // values: x1 y1 x2 y2 -> x1 x2 y1 y2 ; dims likewise
    std::vector<std::size_t> seg_v = {0, x1.arity(), x1.arity() + y1.arity(), x1.arity() + y1.arity() + x2.arity()};
    std::vector<std::size_t> vmap;
    for (std::size_t k = 0; k < x1.arity(); ++k) vmap.push_back(seg_v[0] + k);
    for (std::size_t k = 0; k < x2.arity(); ++k) vmap.push_back(seg_v[2] + k);
    for (std::size_t k = 0; k < y1.arity(); ++k) vmap.push_back(seg_v[1] + k);
    for (std::size_t k = 0; k < y2.arity(); ++k) vmap.push_back(seg_v[3] + k);
    std::vector<std::size_t> tdim;  // source dim -> target dim
    for (std::size_t k = 0; k < x1.dims(); ++k) tdim.push_back(k);
    for (std::size_t k = 0; k < y1.dims(); ++k) tdim.push_back(x1.dims() + x2.dims() + k);
    for (std::size_t k = 0; k < x2.dims(); ++k) tdim.push_back(x1.dims() + k);
    for (std::size_t k = 0; k < y2.dims(); ++k) tdim.push_back(x1.dims() + x2.dims() + y1.dims() + k);
    IntMatrix bm(src.dims(), std::vector<long>(tgt.dims(), 0));
    for (std::size_t j = 0; j < src.dims(); ++j) bm[j][tdim[j]] = 1;
    return make<LinearLens>("dist", src, tgt, vmap, bm);
}

LensSpec lens_swap(const ShelObject& a, const ShelObject& b) {
    ShelObject src = ShelObject::tensor(a, b), tgt = ShelObject::tensor(b, a);
    std::vector<std::size_t> vmap = iota(b.arity(), a.arity());
    for (auto i : iota(a.arity())) vmap.push_back(i);
    IntMatrix bm(src.dims(), std::vector<long>(tgt.dims(), 0));
    for (std::size_t j = 0; j < a.dims(); ++j) bm[j][b.dims() + j] = 1;
    for (std::size_t j = 0; j < b.dims(); ++j) bm[a.dims() + j][j] = 1;
    return make<LinearLens>("swap", src, tgt, vmap, bm);
}

LensSpec lens_assoc(const ShelObject& a, const ShelObject& b, const ShelObject& c) {
    ShelObject src = ShelObject::tensor(ShelObject::tensor(a, b), c);
    ShelObject tgt = ShelObject::tensor(a, ShelObject::tensor(b, c));
    return make<LinearLens>("assoc", src, tgt, iota(src.arity()), identity(src.dims()));
}

LensSpec lens_unitor(const ShelObject& x) {
    return make<LinearLens>("unitor", ShelObject::tensor(ShelObject::unit(), x), x, iota(x.arity()),
                            identity(x.dims()));
}

LensSpec lens_rearrange(const ShelObject& src, const ShelObject& tgt, const std::vector<std::size_t>& vmap,
                        const IntMatrix& bmat, const std::string& label) {
    return make<LinearLens>(label, src, tgt, vmap, bmat);
}

LensSpec compose(const LensSpec& first, const LensSpec& second) { return make<ComposeLens>(first, second); }

LensSpec compose(const std::vector<LensSpec>& chain) {
    if (chain.empty()) throw LensError("compose: empty chain");
    LensSpec acc = chain.front();
    for (std::size_t i = 1; i < chain.size(); ++i) acc = compose(acc, chain[i]);
    return acc;
}

LensSpec parallel(const LensSpec& l, const LensSpec& r) { return make<ParallelLens>(l, r); }

LensSpec parallel_star(const LensSpec& l, const LensSpec& r, const IntMatrix& hom) {
    const ShelObject& x1 = l.source();
    const ShelObject& x2 = r.source();
    if (hom.size() != x2.dims()) throw LensError("parallel_star: hom rows must match dependent dims");
    for (const auto& row : hom)
        if (row.size() != x1.dims()) throw LensError("parallel_star: hom columns must match root dims");
    auto a1 = l.node().affine();
    if (!a1) throw LensError("parallel_star: root lens has no affine backward map; side condition not discharged");
    // delta offsets on root dims read by hom would leak into the dependent
    for (std::size_t r0 = 0; r0 < x1.dims(); ++r0) {
        if (!a1->offset[r0]) continue;
        for (const auto& row : hom)
            if (row[r0] != 0)
                throw LensError("parallel_star: root rounding shift reaches the dependent; side condition not discharged");
    }
    std::size_t tdims = l.target().dims();
    IntMatrix thom(r.target().dims(), std::vector<long>(tdims, 0));
    for (std::size_t k = 0; k < tdims; ++k) {
        RatVec col(x1.dims());
        for (std::size_t i = 0; i < x1.dims(); ++i) col[i] = a1->a[i][k];
        RatVec dir(x2.dims(), 0);
        for (std::size_t d = 0; d < x2.dims(); ++d)
            for (std::size_t i = 0; i < x1.dims(); ++i) dir[d] += hom[d][i] * col[i];
        auto w = r.node().transport(dir);
        if (!w) throw LensError("parallel_star: dependent lens is not equivariant; side condition not discharged");
        for (std::size_t d = 0; d < w->size(); ++d) {
            if ((*w)[d].get_den() != 1)
                throw LensError("parallel_star: induced scale is not an integer; side condition not discharged");
            thom[d][k] = (*w)[d].get_num().get_si();
            if (thom[d][k] < 0) throw LensError("parallel_star: induced scale is negative");
        }
    }
    return make<ParallelStarLens>(l, r, hom, thom);
}

LensSpec parallel_star(const LensSpec& l, const LensSpec& r, long n) {
    return parallel_star(l, r, IntMatrix(r.source().dims(), std::vector<long>(l.source().dims(), n)));
}

LensSpec relabel_unchecked(const LensSpec& l, const ShelObject& src) {
    if (!src.same_shape(l.source())) throw LensError("relabel: shape differs");
    return make<RelabelLens>(l, src);
}

// ---- instances --------------------------------------------------------------

LensInstance::LensInstance(LensSpec spec, std::vector<double> inputs, const RoundingModel& m, prec_t prec,
                           const EvalOptions& opt)
    : spec_(std::move(spec)), env_{m, prec, opt}, inputs_(std::move(inputs)) {
    if (inputs_.size() != spec_.source().arity()) throw LensError("bind: input arity mismatch");
    outputs_ = spec_.node().forward_float(inputs_, env_, trace_);
}

std::vector<ExtReal> LensInstance::deltas() const {
    std::vector<ExtReal> out;
    std::vector<const Trace*> stack{&trace_};
    while (!stack.empty()) {
        const Trace* t = stack.back();
        stack.pop_back();
        out.insert(out.end(), t->deltas.begin(), t->deltas.end());
        for (auto it = t->kids.rbegin(); it != t->kids.rend(); ++it) stack.push_back(&*it);
    }
    return out;
}

Shift LensInstance::backward(const Shift& t) const {
    const ShelObject& tgt = spec_.target();
    if (t.size() != tgt.dims()) throw LensError("backward: shift arity mismatch");
    ExtReal eps = eps_value(env_.model, env_.prec);
    ExtReal slack = ExtReal::pow2(-(env_.prec - 16), env_.prec);
    for (std::size_t k = 0; k < t.size(); ++k) {
        ExtReal lim = ExtReal(tgt.bounds()[k].q(), env_.prec) * eps + slack;
        if (abs(t[k]) > lim) throw std::out_of_range("backward: shift component " + std::to_string(k) + " out of bound");
    }
    return spec_.node().backward(t, trace_, env_.prec);
}

std::vector<ExtReal> LensInstance::witness() const {
    std::vector<ExtReal> x;
    x.reserve(inputs_.size());
    for (double v : inputs_) x.emplace_back(v, env_.prec);
    return act(spec_.source(), x, backward(zero_shift(spec_.target(), env_.prec)));
}

LensInstance bind(const LensSpec& l, const std::vector<double>& inputs, const RoundingModel& m, prec_t prec,
                  const EvalOptions& opt) {
    return LensInstance(l, inputs, m, prec, opt);
}

// ---- sampling and checking ----------------------------------------------------

double draw_log_uniform(std::mt19937_64& rng, bool positive, int lo, int hi) {
    std::uniform_real_distribution<double> e(lo, hi);
    double v = std::exp2(e(rng));
    if (!positive && (rng() & 1)) v = -v;
    return v;
}

Sampler log_uniform_sampler(bool positive, int lo, int hi) {
    return [=](const ShelObject& o, std::mt19937_64& rng) {
        std::vector<double> x(o.arity());
        for (auto& v : x) v = draw_log_uniform(rng, positive, lo, hi);
        return x;
    };
}

Sampler uniform_sampler(double lo, double hi) {
    return [=](const ShelObject& o, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> d(lo, hi);
        std::vector<double> x(o.arity());
        for (auto& v : x) v = d(rng);
        return x;
    };
}

namespace {

double to_format(const RoundingModel& m, double x) {
    return m.format == Format::Binary32 ? static_cast<double>(static_cast<float>(x)) : x;
}

std::string show(const std::vector<double>& x) {
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "]";
    return os.str();
}

}  // namespace

CheckReport check_conditions(const LensSpec& l, std::size_t n_samples, const RoundingModel& m, prec_t prec,
                             const Sampler& sampler, std::uint64_t seed, const EvalOptions& opt) {
    CheckReport rep;
    rep.lens = l.describe();
    const ShelObject& src = l.source();
    const ShelObject& tgt = l.target();
    ExtReal eps = eps_value(m, prec);
    ExtReal tol = ExtReal::pow2(-(prec / 2), prec);
    ExtReal slack = ExtReal::pow2(-(prec - 16), prec);
    std::vector<ExtReal> src_lim, tgt_lim;
    for (const auto& b : src.bounds()) src_lim.push_back(ExtReal(b.q(), prec) * eps + slack);
    for (const auto& b : tgt.bounds()) tgt_lim.push_back(ExtReal(b.q(), prec) * eps);

    for (std::size_t s = 0; s < n_samples; ++s) {
        std::seed_seq ss{seed, static_cast<std::uint64_t>(s)};
        std::mt19937_64 rng(ss);
        std::optional<LensInstance> inst;
        std::vector<double> x;
        for (int attempt = 0; attempt < 100 && !inst; ++attempt) {
            x = sampler(src, rng);
            for (auto& v : x) v = to_format(m, v);
            try {
                inst.emplace(l, x, m, prec, opt);
            } catch (const EvalError&) {
                ++rep.resampled;
            }
        }
        if (!inst) {
            ++rep.failures;
            if (rep.counterexample.empty()) rep.counterexample = "no valid input after 100 draws";
            continue;
        }
        ++rep.samples;
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        Shift t;
        for (std::size_t k = 0; k < tgt.dims(); ++k) {
            double u;
            switch (rng() % 8) {
            case 0: u = 1; break;
            case 1: u = -1; break;
            default: u = unit(rng);
            }
            t.push_back(ExtReal(u, prec) * tgt_lim[k]);
        }
        Shift b = inst->backward(t);
        std::vector<ExtReal> xe;
        for (double v : x) xe.emplace_back(v, prec);
        std::vector<ExtReal> lhs = l.forward_exact(act(src, xe, b));
        std::vector<ExtReal> ye;
        for (double v : inst->outputs()) ye.emplace_back(v, prec);
        std::vector<ExtReal> rhs = act(tgt, ye, t);
        std::string why;
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            ExtReal r = rp_distance(lhs[i], rhs[i]);
            rep.max_residual_log2 = std::max(rep.max_residual_log2, r.log2_abs());
            if (r > tol && why.empty()) why = "exactness residual " + r.str(6) + " at output " + std::to_string(i);
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            ExtReal a = abs(b[j]);
            if (!src.bounds()[j].is_zero())
                rep.max_norm_ratio = std::max(rep.max_norm_ratio, (a / (ExtReal(src.bounds()[j].q(), prec) * eps)).to_double());
            if (a > src_lim[j] && why.empty())
                why = "bound: |b_" + std::to_string(j) + "| = " + (a / eps).str(8) + " eps exceeds " +
                      src.bounds()[j].str();
        }
        if (!why.empty()) {
            ++rep.failures;
            if (rep.counterexample.empty()) rep.counterexample = why + " at x = " + show(x);
        }
    }
    return rep;
}

std::vector<CatalogEntry> lens_catalog(const RoundingModel& m) {
    using K = ShelObject;
    std::vector<CatalogEntry> c;
    auto any = log_uniform_sampler(false);
    auto pos = log_uniform_sampler(true);
    auto add = [&](LensSpec l, Sampler s) { c.push_back({l.describe(), std::move(l), std::move(s)}); };

    add(lens_add(0), any);
    add(lens_add(3), any);
    add(lens_sub(0), any);
    add(lens_sub(2), any);
    add(lens_mul(0), any);
    add(lens_mul(1), any);
    add(lens_div(0), any);
    add(lens_div(2), any);
    add(lens_sqrt(0), pos);
    add(lens_sqrt(0), any);  // |x| convention on negative inputs
    add(lens_sqrt(3), pos);
    add(lens_log(0, m), uniform_sampler(2, 1e6));
    add(lens_log(1, m), uniform_sampler(2, 1e6));
    for (long n = 0; n <= 2; ++n) add(lens_dmul(n, 1, 0), any);
    add(lens_dmul(1, Bound(3, 2), 2, 2, 1), any);
    add(lens_adddiv(0, 0, 1), pos);
    add(lens_adddiv(1, 1, 2), any);

    K b1 = K::base(1, 1), b2 = K::base(2, 1), b0 = K::base(1, 0), b3 = K::base(1, 3);
    add(lens_id(K::star(b1, b3, 2)), any);
    add(lens_weaken(K::base(1, 2), b1), any);
    add(lens_dup(1), any);
    add(lens_dup(2, 2), any);
    add(lens_share_tensor(b1, b2), any);
    add(lens_share_star(0, b1, b1), any);
    add(lens_share_star(1, b1, b0), any);
    add(lens_share_star(2, b1, b1), any);
    add(lens_share_star(3, K::base(1, Bound(1, 2)), b1), any);
    add(lens_push(1, 0, b1, K::base(1, 2)), any);
    add(lens_push(0, 2, b1, b0), any);
    add(lens_push(2, 1, K::base(2, 1), K::base(1, 1)), any);
    add(lens_proj1(K::star(b1, b3, 1)), any);
    add(lens_proj2(K::star(b0, b3, 1)), any);
    add(lens_dist(K::star(b1, b3, 1), K::star(b0, b2, 2)), any);
    add(lens_swap(b1, K::star(b0, b3, 1)), any);
    add(lens_assoc(b1, b2, b3), any);
    add(lens_unitor(b2), any);
    add(parallel(lens_id(b1), lens_add(0)), any);
    add(parallel(lens_mul(1), lens_sqrt(0)), any);
    add(parallel_star(lens_id(K::base(2, 0)), lens_add(0), 1), pos);
    add(parallel_star(lens_share_tensor(b0, b0), lens_share_tensor(b3, b3), IntMatrix{{1, 0}, {0, 1}}), any);
    add(compose(lens_mul(2), lens_sqrt(0)), any);
    return c;
}

}  // namespace shel
