#include "shel/context.hpp"

#include <algorithm>
#include <string_view>
#include <unordered_set>

namespace shel {

CtxBase make_base(std::vector<Expr> exprs, Bound bound, long scale) {
    return CtxBase{scale, std::move(exprs), std::move(bound)};
}

CtxTree make_tree(CtxBase root, std::vector<CtxBase> deps) { return CtxTree{std::move(root), std::move(deps)}; }

void check_well_formed(const Ctx& g) {
    std::unordered_set<std::string_view> seen;
    auto check_base = [&](const CtxBase& b, bool dep) {
        if (b.exprs.empty()) throw ContextError("base with no expressions");
        if (b.scale < 0) throw ContextError("negative scale");
        if (!dep && b.scale != 0) throw ContextError("root base with nonzero scale");
        for (const auto& e : b.exprs) {
            if (e.empty()) throw ContextError("empty expression in base");
            if (!seen.insert(e.key()).second) throw ContextError("expression bound twice: " + e.key());
        }
    };
    for (const auto& t : g.trees) {
        check_base(t.root, false);
        for (const auto& d : t.deps) check_base(d, true);
    }
}

bool well_formed(const Ctx& g) {
    try {
        check_well_formed(g);
        return true;
    } catch (const ContextError&) {
        return false;
    }
}

namespace {

void base_str(const CtxBase& b, bool bounds, std::string& out) {
    out += "(Base ";
    out += std::to_string(b.scale);
    out += ' ';
    if (b.exprs.size() == 1) {
        out += b.exprs[0].key();
    } else {
        out += "(Vars";
        for (const auto& e : b.exprs) {
            out += ' ';
            out += e.key();
        }
        out += ')';
    }
    if (bounds) {
        out += ' ';
        out += b.bound.str();
    }
    out += ')';
}

void tree_str(const CtxTree& t, bool bounds, std::string& out) {
    if (t.deps.empty()) {
        base_str(t.root, bounds, out);
        return;
    }
    out += "(Star ";
    base_str(t.root, bounds, out);
    out += ' ';
    for (std::size_t i = 0; i + 1 < t.deps.size(); ++i) out += "(Tens ";
    base_str(t.deps[0], bounds, out);
    for (std::size_t i = 1; i < t.deps.size(); ++i) {
        out += ' ';
        base_str(t.deps[i], bounds, out);
        out += ')';
    }
    out += ')';
}

std::string ctx_str(const Ctx& g, bool bounds) {
    if (g.trees.empty()) return "(Unit)";
    std::string out;
    for (std::size_t i = 0; i + 1 < g.trees.size(); ++i) out += "(Tens ";
    tree_str(g.trees[0], bounds, out);
    for (std::size_t i = 1; i < g.trees.size(); ++i) {
        out += ' ';
        tree_str(g.trees[i], bounds, out);
        out += ')';
    }
    return out;
}

std::string base_shape(const CtxBase& b) {
    std::string s;
    base_str(b, false, s);
    return s;
}

}  // namespace

std::string serialize(const Ctx& g) { return ctx_str(g, true); }
std::string shape_key(const Ctx& g) { return ctx_str(g, false); }

std::string serialize(const CtxTree& t) {
    std::string s;
    tree_str(t, true, s);
    return s;
}

std::string shape_key(const CtxTree& t) {
    std::string s;
    tree_str(t, false, s);
    return s;
}

Ctx canonicalize(Ctx g) {
    std::vector<CtxTree> out;
    out.reserve(g.trees.size());
    for (auto& t : g.trees) {
        t.root.scale = 0;
        std::vector<CtxBase> keep;
        for (auto& d : t.deps) {
            if (d.scale == 0) out.push_back(CtxTree{std::move(d), {}});
            else keep.push_back(std::move(d));
        }
        t.deps = std::move(keep);
        out.push_back(std::move(t));
    }
    auto sort_base = [](CtxBase& b) { std::sort(b.exprs.begin(), b.exprs.end(), ExprKeyLess{}); };
    // Expressions are distinct across a well-formed context, so ordering by
    // shape alone is total and puts equal shapes' bounds in the same slots.
    for (auto& t : out) {
        sort_base(t.root);
        for (auto& d : t.deps) sort_base(d);
        std::sort(t.deps.begin(), t.deps.end(),
                  [](const CtxBase& a, const CtxBase& b) { return base_shape(a) < base_shape(b); });
    }
    std::vector<std::pair<std::string, std::size_t>> order;
    for (std::size_t i = 0; i < out.size(); ++i) order.emplace_back(shape_key(out[i]), i);
    std::sort(order.begin(), order.end());
    Ctx r;
    r.trees.reserve(out.size());
    for (auto& [k, i] : order) r.trees.push_back(std::move(out[i]));
    return r;
}

std::vector<Bound> bound_vector(const Ctx& g) {
    std::vector<Bound> b;
    for (const auto& t : g.trees) {
        b.push_back(t.root.bound);
        for (const auto& d : t.deps) b.push_back(d.bound);
    }
    return b;
}

std::size_t expr_count(const Ctx& g) {
    std::size_t n = 0;
    for (const auto& t : g.trees) {
        n += t.root.exprs.size();
        for (const auto& d : t.deps) n += d.exprs.size();
    }
    return n;
}

ShelObject interpret(const CtxBase& b) { return ShelObject::base(b.exprs.size(), b.bound); }

ShelObject interpret(const CtxTree& t) {
    ShelObject root = interpret(t.root);
    if (t.deps.empty()) return root;
    std::vector<ShelObject> deps;
    IntMatrix hom;
    for (const auto& d : t.deps) {
        deps.push_back(interpret(d));
        hom.push_back({d.scale});
    }
    return ShelObject::star(root, ShelObject::tensor(deps), hom);
}

ShelObject interpret(const Ctx& g) {
    std::vector<ShelObject> parts;
    for (const auto& t : g.trees) parts.push_back(interpret(t));
    return ShelObject::tensor(parts);
}

std::vector<Expr> value_labels(const CtxTree& t) {
    std::vector<Expr> out = t.root.exprs;
    for (const auto& d : t.deps) out.insert(out.end(), d.exprs.begin(), d.exprs.end());
    return out;
}

std::vector<Expr> value_labels(const Ctx& g) {
    std::vector<Expr> out;
    for (const auto& t : g.trees) {
        auto l = value_labels(t);
        out.insert(out.end(), l.begin(), l.end());
    }
    return out;
}

Ctx goal_context(const Expr& e) { return Ctx{{make_tree(make_base({canonical(e)}, 0))}}; }

Ctx start_context(const std::map<std::string, Bound>& bounds) {
    Ctx g;
    for (const auto& [v, b] : bounds) g.trees.push_back(make_tree(make_base({Expr::var(v)}, b)));
    return canonicalize(std::move(g));
}

std::optional<std::map<std::string, Bound>> is_start_context(const Ctx& g, const Expr& e) {
    std::map<std::string, Bound> out;
    for (const auto& t : g.trees) {
        if (!t.deps.empty() || t.root.exprs.size() != 1) return std::nullopt;
        const Expr& x = t.root.exprs[0];
        if (x.op() != Op::Var) return std::nullopt;
        if (!out.emplace(x.name(), t.root.bound).second) return std::nullopt;
    }
    auto vars = free_vars(e);
    if (vars.size() != out.size()) return std::nullopt;
    for (const auto& v : vars)
        if (!out.count(v)) return std::nullopt;
    return out;
}

}  // namespace shel
