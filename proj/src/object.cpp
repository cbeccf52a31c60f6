#include "shel/object.hpp"

#include <stdexcept>

namespace shel {

ShelObject::ShelObject() {
    static const std::shared_ptr<const Node> unit_node = std::make_shared<Node>();
    n_ = unit_node;
}

ShelObject ShelObject::finish(std::shared_ptr<Node> n) {
    switch (n->kind) {
    case Kind::Unit: break;
    case Kind::Base:
        n->bounds = {n->bound};
        n->action.assign(n->arity, std::vector<long>{1});
        n->leaves = {Leaf{0, n->arity, 0, n->bound}};
        break;
    case Kind::Tensor:
    case Kind::Star: {
        const ShelObject& a = n->kids[0];
        const ShelObject& b = n->kids[1];
        n->arity = a.arity() + b.arity();
        n->dims = a.dims() + b.dims();
        n->bounds = a.bounds();
        n->bounds.insert(n->bounds.end(), b.bounds().begin(), b.bounds().end());
        n->action.assign(n->arity, std::vector<long>(n->dims, 0));
        for (std::size_t i = 0; i < a.arity(); ++i)
            for (std::size_t j = 0; j < a.dims(); ++j) n->action[i][j] = a.action()[i][j];
        for (std::size_t i = 0; i < b.arity(); ++i) {
            auto& row = n->action[a.arity() + i];
            for (std::size_t j = 0; j < b.dims(); ++j) row[a.dims() + j] = b.action()[i][j];
            if (n->kind == Kind::Star) {
                // dep value sees (hom * s_root) through its own action row
                for (std::size_t r = 0; r < a.dims(); ++r) {
                    long c = 0;
                    for (std::size_t j = 0; j < b.dims(); ++j) c += b.action()[i][j] * n->hom[j][r];
                    row[r] = c;
                }
            }
        }
        n->leaves = a.leaves();
        for (Leaf l : b.leaves()) {
            l.value_offset += a.arity();
            l.dim += a.dims();
            n->leaves.push_back(l);
        }
        break;
    }
    }
    ShelObject o;
    o.n_ = std::move(n);
    return o;
}

ShelObject ShelObject::base(std::size_t arity, Bound p) {
    if (arity == 0) throw std::invalid_argument("base with no values");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Base;
    n->arity = arity;
    n->dims = 1;
    n->bound = std::move(p);
    return finish(std::move(n));
}

ShelObject ShelObject::tensor(const ShelObject& l, const ShelObject& r) {
    if (l.kind() == Kind::Unit) return r;
    if (r.kind() == Kind::Unit) return l;
    auto n = std::make_shared<Node>();
    n->kind = Kind::Tensor;
    n->kids = {l, r};
    return finish(std::move(n));
}

ShelObject ShelObject::tensor(const std::vector<ShelObject>& parts) {
    ShelObject acc;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) acc = tensor(*it, acc);
    return acc;
}

ShelObject ShelObject::star(const ShelObject& root, const ShelObject& dep, long n) {
    if (root.dims() != 1) throw std::invalid_argument("uniform star scale needs a one-dimensional root");
    if (n < 0) throw std::invalid_argument("negative star scale");
    return star(root, dep, IntMatrix(dep.dims(), std::vector<long>{n}));
}

ShelObject ShelObject::star(const ShelObject& root, const ShelObject& dep, const IntMatrix& hom) {
    if (root.kind() == Kind::Unit || dep.kind() == Kind::Unit) throw std::invalid_argument("star with unit side");
    if (hom.size() != dep.dims()) throw std::invalid_argument("star hom row count mismatch");
    bool zero = true;
    for (const auto& row : hom) {
        if (row.size() != root.dims()) throw std::invalid_argument("star hom column count mismatch");
        for (long v : row) zero = zero && v == 0;
    }
    if (zero) return tensor(root, dep);
    auto n = std::make_shared<Node>();
    n->kind = Kind::Star;
    n->kids = {root, dep};
    n->hom = hom;
    return finish(std::move(n));
}

const Bound& ShelObject::bound() const {
    if (kind() != Kind::Base) throw std::logic_error("bound() on a non-base object");
    return n_->bound;
}

const ShelObject& ShelObject::left() const {
    if (n_->kids.size() != 2) throw std::logic_error("left() on a leaf object");
    return n_->kids[0];
}

const ShelObject& ShelObject::right() const {
    if (n_->kids.size() != 2) throw std::logic_error("right() on a leaf object");
    return n_->kids[1];
}

const IntMatrix& ShelObject::hom() const {
    if (kind() != Kind::Star) throw std::logic_error("hom() on a non-star object");
    return n_->hom;
}

ShelObject ShelObject::with_bounds(const std::vector<Bound>& b) const {
    if (b.size() != dims()) throw std::invalid_argument("bound vector length mismatch");
    switch (kind()) {
    case Kind::Unit: return *this;
    case Kind::Base: return base(arity(), b[0]);
    case Kind::Tensor:
    case Kind::Star: {
        std::vector<Bound> lb(b.begin(), b.begin() + static_cast<long>(left().dims()));
        std::vector<Bound> rb(b.begin() + static_cast<long>(left().dims()), b.end());
        ShelObject l = left().with_bounds(lb), r = right().with_bounds(rb);
        return kind() == Kind::Tensor ? tensor(l, r) : star(l, r, hom());
    }
    }
    return *this;
}

bool ShelObject::same_shape(const ShelObject& o) const {
    if (n_ == o.n_) return true;
    if (kind() != o.kind() || arity() != o.arity() || dims() != o.dims()) return false;
    switch (kind()) {
    case Kind::Unit:
    case Kind::Base: return true;
    case Kind::Star:
        if (hom() != o.hom()) return false;
        [[fallthrough]];
    case Kind::Tensor: return left().same_shape(o.left()) && right().same_shape(o.right());
    }
    return false;
}

bool operator==(const ShelObject& a, const ShelObject& b) { return a.same_shape(b) && a.bounds() == b.bounds(); }

std::string ShelObject::str() const {
    switch (kind()) {
    case Kind::Unit: return "I";
    case Kind::Base: return "R" + (arity() > 1 ? "^" + std::to_string(arity()) : std::string()) + "[" + bound().str() + "]";
    case Kind::Tensor: return "(" + left().str() + " x " + right().str() + ")";
    case Kind::Star: {
        std::string h;
        bool uniform = left().dims() == 1;
        long first = hom()[0][0];
        for (const auto& row : hom()) uniform = uniform && row[0] == first;
        if (uniform) {
            h = std::to_string(first);
        } else {
            for (std::size_t i = 0; i < hom().size(); ++i) {
                h += i ? ";" : "";
                for (std::size_t j = 0; j < hom()[i].size(); ++j) h += (j ? "," : "") + std::to_string(hom()[i][j]);
            }
            h = "[" + h + "]";
        }
        return "(" + left().str() + " *" + h + " " + right().str() + ")";
    }
    }
    return "?";
}

std::vector<ExtReal> act(const ShelObject& obj, const std::vector<ExtReal>& x, const Shift& s) {
    if (x.size() != obj.arity() || s.size() != obj.dims()) throw std::invalid_argument("act: arity mismatch");
    std::vector<ExtReal> out;
    out.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        ExtReal e(x[i].precision());
        for (std::size_t j = 0; j < s.size(); ++j) {
            long c = obj.action()[i][j];
            if (c == 0) continue;
            if (c == 1) e += s[j];
            else e += ExtReal(static_cast<double>(c), s[j].precision()) * s[j];
        }
        out.push_back(e.is_zero() ? x[i] : x[i] * exp(e));
    }
    return out;
}

Shift zero_shift(const ShelObject& obj, prec_t prec) { return Shift(obj.dims(), ExtReal(prec)); }

}  // namespace shel
