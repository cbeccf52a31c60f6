#include "shel/synth.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <unordered_map>

namespace shel {

const char* rule_name(RuleKind k) {
    switch (k) {
    case RuleKind::Add: return "add";
    case RuleKind::Mul: return "mul";
    case RuleKind::Sqrt: return "sqrt";
    case RuleKind::Sub: return "sub";
    case RuleKind::Div: return "div";
    case RuleKind::Share: return "share";
    case RuleKind::ShareStar: return "share-star";
    case RuleKind::DepShare: return "dep-share";
    case RuleKind::AddStar: return "add-star";
    case RuleKind::MulStar: return "mul-star";
    case RuleKind::SqrtStar: return "sqrt-star";
    case RuleKind::Push: return "push";
    case RuleKind::Attach: return "attach";
    case RuleKind::DMul: return "dmul";
    case RuleKind::Proj2: return "proj2";
    }
    return "?";
}

std::vector<RuleKind> RuleSet::all_kinds() {
    return {RuleKind::Add,      RuleKind::Mul,     RuleKind::Sqrt,     RuleKind::Sub,      RuleKind::Div,
            RuleKind::Share,    RuleKind::ShareStar, RuleKind::DepShare, RuleKind::AddStar, RuleKind::MulStar,
            RuleKind::SqrtStar, RuleKind::Push,    RuleKind::Attach,   RuleKind::DMul,     RuleKind::Proj2};
}

namespace {

bool* rule_flag(RuleSet& r, RuleKind k) {
    switch (k) {
    case RuleKind::Add: return &r.add;
    case RuleKind::Mul: return &r.mul;
    case RuleKind::Sqrt: return &r.sqrt;
    case RuleKind::Sub:
    case RuleKind::Div: return &r.sub_div;
    case RuleKind::Share: return &r.share;
    case RuleKind::ShareStar: return &r.share_star;
    case RuleKind::DepShare: return &r.dep_share;
    case RuleKind::AddStar: return &r.add_star;
    case RuleKind::MulStar: return &r.mul_star;
    case RuleKind::SqrtStar: return &r.sqrt_star;
    case RuleKind::Push: return &r.push;
    case RuleKind::Attach: return &r.attach;
    case RuleKind::DMul: return &r.dmul;
    case RuleKind::Proj2: return &r.proj2;
    }
    return nullptr;
}

}  // namespace

bool RuleSet::enabled(RuleKind k) const { return *rule_flag(const_cast<RuleSet&>(*this), k); }
void RuleSet::set(RuleKind k, bool on) { *rule_flag(*this, k) = on; }

RuleSet RuleSet::parse(const std::string& spec) {
    RuleSet r;
    bool first = true;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item.empty()) continue;
        bool off = item[0] == '-';
        std::string name = off ? item.substr(1) : item;
        if (name == "default") {
            r = RuleSet{};
        } else if (name == "all") {
            for (auto k : all_kinds()) r.set(k, !off);
        } else {
            bool found = false;
            for (auto k : all_kinds()) {
                if (name == rule_name(k)) {
                    // a plain list names exactly the enabled rules
                    if (first && !off)
                        for (auto j : all_kinds()) r.set(j, false);
                    r.set(k, !off);
                    found = true;
                    break;
                }
            }
            if (!found) throw std::invalid_argument("unknown rule '" + name + "'");
        }
        first = false;
    }
    return r;
}

std::string RuleApp::str() const {
    std::string s = rule_name(kind);
    s += "[tree=" + std::to_string(tree);
    switch (kind) {
    case RuleKind::Share: s += ",mask=" + std::to_string(mask) + ",place=" + std::to_string(aux); break;
    case RuleKind::ShareStar: s += ",mask=" + std::to_string(mask) + ",n=" + std::to_string(n); break;
    case RuleKind::DepShare: s += ",dep=" + std::to_string(dep) + ",mask=" + std::to_string(mask); break;
    case RuleKind::AddStar:
    case RuleKind::MulStar:
    case RuleKind::SqrtStar: s += ",dep=" + std::to_string(dep); break;
    case RuleKind::Push: s += ",dep=" + std::to_string(dep) + ",from=" + std::to_string(n); break;
    case RuleKind::Attach:
        s += ",root=" + std::to_string(other) + ",operand=" + std::to_string(operand) + ",n=" + std::to_string(n);
        break;
    case RuleKind::DMul: s += ",dep=" + std::to_string(dep) + ",operand=" + std::to_string(operand); break;
    case RuleKind::Proj2: s += ",operand=" + std::to_string(operand); break;
    default: break;
    }
    return s + "]";
}

Bound BoundReport::max_bound() const {
    Bound m;
    for (const auto& [v, b] : bounds) m = max(m, b);
    return m;
}

std::string BoundReport::str() const {
    std::string s = "{";
    bool first = true;
    for (const auto& [v, b] : bounds) {
        s += (first ? "" : ", ") + v + ": " + b.str();
        first = false;
    }
    return s + "}";
}

// ---- rule application -------------------------------------------------------

namespace {

struct Core {
    LensSpec lens;
    std::vector<Expr> src_labels, tgt_labels;
    std::vector<std::size_t> involved;  // target tree indices
};

struct Applied {
    Ctx src;
    std::optional<Core> core;
};

std::vector<Expr> cat(std::vector<Expr> a, const std::vector<Expr>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

bool contains(const std::vector<Expr>& v, const Expr& e, std::size_t* at = nullptr) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i].key() == e.key()) {
            if (at) *at = i;
            return true;
        }
    return false;
}

ShelObject deps_object(const std::vector<CtxBase>& deps) {
    std::vector<ShelObject> parts;
    for (const auto& d : deps) parts.push_back(interpret(d));
    return ShelObject::tensor(parts);
}

std::vector<Expr> deps_labels(const std::vector<CtxBase>& deps) {
    std::vector<Expr> out;
    for (const auto& d : deps) out.insert(out.end(), d.exprs.begin(), d.exprs.end());
    return out;
}

// `inner` acts on root * focus; the tree's other dependents ride along on the
// root shift through a push-parallel lens.
Core with_others(LensSpec inner, std::vector<Expr> src_labels, std::vector<Expr> tgt_labels,
                 const std::vector<CtxBase>& others, std::vector<std::size_t> involved) {
    if (others.empty()) return Core{std::move(inner), std::move(src_labels), std::move(tgt_labels), std::move(involved)};
    IntMatrix hom;
    for (const auto& d : others) {
        std::vector<long> row(inner.source().dims(), 0);
        row[0] = d.scale;
        hom.push_back(std::move(row));
    }
    LensSpec l = parallel_star(inner, lens_id(deps_object(others)), hom);
    auto extra = deps_labels(others);
    return Core{l, cat(std::move(src_labels), extra), cat(std::move(tgt_labels), extra), std::move(involved)};
}

std::vector<CtxBase> without(const std::vector<CtxBase>& v, std::size_t k) {
    std::vector<CtxBase> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (i != k) out.push_back(v[i]);
    return out;
}

LensSpec binary_prim(Op op, const Bound& p) {
    switch (op) {
    case Op::Add: return lens_add(p);
    case Op::Mul: return lens_mul(p);
    case Op::Sub: return lens_sub(p);
    default: throw std::logic_error("binary_prim");
    }
}

Bound binary_src_bound(Op op, const Bound& p) { return op == Op::Mul ? (p + 1) / Bound(2) : p + 1; }

// prim on [l, r], or dup ; prim when both operands are the same term
LensSpec binary_core(Op op, const Bound& p, bool same) {
    LensSpec prim = binary_prim(op, p);
    if (!same) return prim;
    return compose(lens_dup(binary_src_bound(op, p)), prim);
}

std::vector<Expr> operands(const Expr& e) {
    if (e.lhs().key() == e.rhs().key()) return {e.lhs()};
    return {e.lhs(), e.rhs()};
}

std::optional<Applied> apply_impl(const Ctx& dst, const RuleApp& app, long max_scale, bool want_lens) {
    if (app.tree >= dst.trees.size()) return std::nullopt;
    Ctx src = dst;
    const CtxTree& t = dst.trees[app.tree];
    const Bound& p = t.root.bound;
    std::optional<Core> core;

    auto single = [](const CtxBase& b, Op op) { return b.exprs.size() == 1 && b.exprs[0].op() == op; };
    auto standalone = [&](Op op) { return t.deps.empty() && single(t.root, op); };

    switch (app.kind) {
    case RuleKind::Add:
    case RuleKind::Mul:
    case RuleKind::Sub: {
        Op op = app.kind == RuleKind::Add ? Op::Add : app.kind == RuleKind::Mul ? Op::Mul : Op::Sub;
        if (!standalone(op)) return std::nullopt;
        const Expr& e = t.root.exprs[0];
        auto xs = operands(e);
        src.trees[app.tree] = make_tree(make_base(xs, binary_src_bound(op, p)));
        if (want_lens) core = Core{binary_core(op, p, xs.size() == 1), xs, {e}, {app.tree}};
        break;
    }
    case RuleKind::Sqrt: {
        if (!standalone(Op::Sqrt)) return std::nullopt;
        const Expr& e = t.root.exprs[0];
        src.trees[app.tree] = make_tree(make_base({e.lhs()}, Bound(2) * p + 2));
        if (want_lens) core = Core{lens_sqrt(p), {e.lhs()}, {e}, {app.tree}};
        break;
    }
    case RuleKind::Div: {
        if (!standalone(Op::Div)) return std::nullopt;
        const Expr& e = t.root.exprs[0];
        if (e.lhs().key() == e.rhs().key()) return std::nullopt;
        src.trees[app.tree] = make_tree(make_base({e.lhs()}, p + 1));
        src.trees.push_back(make_tree(make_base({e.rhs()}, 0)));
        if (want_lens) core = Core{lens_div(p), {e.lhs(), e.rhs()}, {e}, {app.tree}};
        break;
    }
    case RuleKind::Share:
    case RuleKind::ShareStar: {
        const auto& xs = t.root.exprs;
        std::size_t k = xs.size();
        if (k < 2 || k > 63) return std::nullopt;
        std::uint64_t full = (std::uint64_t{1} << k) - 1;
        if (app.mask == 0 || (app.mask & full) == full || (app.mask & ~full) != 0) return std::nullopt;
        std::vector<Expr> a, b;
        for (std::size_t i = 0; i < k; ++i) ((app.mask >> i) & 1 ? a : b).push_back(xs[i]);
        long n = app.kind == RuleKind::Share ? 0 : app.n;
        if (app.kind == RuleKind::ShareStar && (n < 1 || n > max_scale)) return std::nullopt;
        Bound qb = n == 0 ? p : Bound(std::labs(n - 1)) * p;
        CtxBase ra = make_base(a, p), rb = make_base(b, qb, n);
        std::vector<long> place(t.deps.size(), 0);  // 0: with a, 1: with b
        if (n == 0) {
            if (t.deps.size() > 63 || (app.aux >> t.deps.size()) != 0) return std::nullopt;
            for (std::size_t j = 0; j < t.deps.size(); ++j) place[j] = static_cast<long>((app.aux >> j) & 1);
            CtxTree ta{ra, {}}, tb{rb, {}};
            tb.root.scale = 0;
            for (std::size_t j = 0; j < t.deps.size(); ++j) (place[j] ? tb : ta).deps.push_back(t.deps[j]);
            src.trees[app.tree] = std::move(ta);
            src.trees.push_back(std::move(tb));
        } else {
            if (app.aux != 0) return std::nullopt;
            CtxTree ta{ra, {rb}};
            for (const auto& d : t.deps) ta.deps.push_back(d);
            src.trees[app.tree] = std::move(ta);
        }
        if (want_lens) {
            ShelObject oa = interpret(ra), ob = interpret(make_base(b, qb));
            LensSpec inner = n == 0 ? lens_share_tensor(oa, ob) : lens_share_star(n, oa, ob);
            auto ab = cat(a, b);
            if (t.deps.empty()) {
                core = Core{inner, ab, ab, {app.tree}};
            } else {
                IntMatrix hom;
                for (std::size_t j = 0; j < t.deps.size(); ++j)
                    hom.push_back(place[j] ? std::vector<long>{0, t.deps[j].scale} : std::vector<long>{t.deps[j].scale, 0});
                LensSpec l = parallel_star(inner, lens_id(deps_object(t.deps)), hom);
                auto dl = deps_labels(t.deps);
                core = Core{l, cat(ab, dl), cat(ab, dl), {app.tree}};
            }
        }
        break;
    }
    case RuleKind::DepShare: {
        if (app.dep >= t.deps.size()) return std::nullopt;
        const CtxBase& d = t.deps[app.dep];
        std::size_t k = d.exprs.size();
        if (k < 2 || k > 63) return std::nullopt;
        std::uint64_t full = (std::uint64_t{1} << k) - 1;
        if (!(app.mask & 1) || (app.mask & full) == full || (app.mask & ~full) != 0) return std::nullopt;
        std::vector<Expr> a, b;
        for (std::size_t i = 0; i < k; ++i) ((app.mask >> i) & 1 ? a : b).push_back(d.exprs[i]);
        CtxTree& st = src.trees[app.tree];
        st.deps[app.dep] = make_base(a, d.bound, d.scale);
        st.deps.push_back(make_base(b, d.bound, d.scale));
        if (want_lens) {
            LensSpec inner = parallel_star(
                lens_id(interpret(t.root)),
                lens_share_tensor(ShelObject::base(a.size(), d.bound), ShelObject::base(b.size(), d.bound)), d.scale);
            core = with_others(inner, cat(cat(t.root.exprs, a), b), cat(cat(t.root.exprs, a), b),
                               without(t.deps, app.dep), {app.tree});
        }
        break;
    }
    case RuleKind::AddStar:
    case RuleKind::MulStar:
    case RuleKind::SqrtStar: {
        if (app.dep >= t.deps.size()) return std::nullopt;
        const CtxBase& d = t.deps[app.dep];
        const Bound& q = d.bound;
        CtxBase& sd = src.trees[app.tree].deps[app.dep];
        LensSpec dep_lens = lens_id(interpret(d));
        std::vector<Expr> xs;
        long s_scale = d.scale;
        if (app.kind == RuleKind::SqrtStar) {
            if (!single(d, Op::Sqrt) || 2 * d.scale > max_scale) return std::nullopt;
            xs = {d.exprs[0].lhs()};
            s_scale = 2 * d.scale;
            sd = make_base(xs, Bound(2) * q + 2, s_scale);
            if (want_lens) dep_lens = lens_sqrt(q);
        } else {
            Op op = app.kind == RuleKind::AddStar ? Op::Add : Op::Mul;
            if (!single(d, op)) return std::nullopt;
            if (op == Op::Mul) {
                if (d.scale % 2 != 0) return std::nullopt;
                s_scale = d.scale / 2;
            }
            xs = operands(d.exprs[0]);
            sd = make_base(xs, binary_src_bound(op, q), s_scale);
            if (want_lens) dep_lens = binary_core(op, q, xs.size() == 1);
        }
        if (want_lens) {
            LensSpec inner = parallel_star(lens_id(interpret(t.root)), dep_lens, s_scale);
            core = with_others(inner, cat(t.root.exprs, xs), cat(t.root.exprs, d.exprs), without(t.deps, app.dep),
                               {app.tree});
        }
        break;
    }
    case RuleKind::Push: {
        if (app.dep >= t.deps.size()) return std::nullopt;
        const CtxBase& d = t.deps[app.dep];
        long m = app.n;
        if (m < 0 || m > max_scale || m == d.scale) return std::nullopt;
        src.trees[app.tree].deps[app.dep] = make_base(d.exprs, d.bound + Bound(std::labs(m - d.scale)) * p, m);
        if (want_lens) {
            LensSpec inner = lens_push(m, d.scale, interpret(t.root), interpret(d));
            core = with_others(inner, cat(t.root.exprs, d.exprs), cat(t.root.exprs, d.exprs),
                               without(t.deps, app.dep), {app.tree});
        }
        break;
    }
    case RuleKind::Attach: {
        if (!standalone(Op::Mul) || app.other >= dst.trees.size() || app.other == app.tree) return std::nullopt;
        const Expr& e = t.root.exprs[0];
        if (app.operand > 1 || app.n < 1 || app.n > max_scale) return std::nullopt;
        const CtxTree& host = dst.trees[app.other];
        const Expr& x = app.operand == 0 ? e.lhs() : e.rhs();
        if (!contains(host.root.exprs, x)) return std::nullopt;
        const Bound& q = t.root.bound;
        const Bound& ph = host.root.bound;
        CtxBase nd = make_base({e}, q + Bound(app.n) * ph, app.n);
        src.trees[app.other].deps.push_back(nd);
        src.trees.erase(src.trees.begin() + static_cast<long>(app.tree));
        if (want_lens) {
            LensSpec inner = lens_push(app.n, 0, interpret(host.root), ShelObject::base(1, q));
            core = with_others(inner, cat(host.root.exprs, {e}), cat(host.root.exprs, {e}), host.deps,
                               {app.other, app.tree});
        }
        break;
    }
    case RuleKind::DMul: {
        if (app.dep >= t.deps.size() || app.operand > 1) return std::nullopt;
        const CtxBase& d = t.deps[app.dep];
        if (!single(d, Op::Mul) || d.scale < 1) return std::nullopt;
        const Expr& e = d.exprs[0];
        const Expr& x = app.operand == 0 ? e.lhs() : e.rhs();
        const Expr& y = app.operand == 0 ? e.rhs() : e.lhs();
        std::size_t idx = 0;
        if (!contains(t.root.exprs, x, &idx)) return std::nullopt;
        long n = d.scale - 1;
        src.trees[app.tree].deps[app.dep] = make_base({y}, d.bound + 1, n);
        if (want_lens) {
            LensSpec inner = lens_dmul(n, p, d.bound, t.root.exprs.size(), idx);
            core = with_others(inner, cat(t.root.exprs, {y}), cat(t.root.exprs, {e}), without(t.deps, app.dep),
                               {app.tree});
        }
        break;
    }
    case RuleKind::Proj2: {
        if (!standalone(Op::Mul) || app.operand > 1) return std::nullopt;
        const Expr& e = t.root.exprs[0];
        const Expr& x = app.operand == 0 ? e.lhs() : e.rhs();
        src.trees[app.tree] = make_tree(make_base({x}, 0), {make_base({e}, p, 1)});
        if (want_lens) {
            LensSpec l = lens_proj2(ShelObject::star(ShelObject::base(1, 0), ShelObject::base(1, p), 1));
            core = Core{l, {x, e}, {e}, {app.tree}};
        }
        break;
    }
    }
    if (!well_formed(src)) return std::nullopt;
    return Applied{canonicalize(std::move(src)), std::move(core)};
}

}  // namespace

std::optional<Ctx> apply_rule(const Ctx& dst, const RuleApp& app, long max_scale) {
    auto a = apply_impl(dst, app, max_scale, false);
    if (!a) return std::nullopt;
    return std::move(a->src);
}

std::vector<std::pair<RuleApp, Ctx>> predecessors(const Ctx& dst, const RuleSet& rules, long max_scale) {
    std::vector<std::pair<RuleApp, Ctx>> out;
    auto attempt = [&](const RuleApp& app) {
        if (!rules.enabled(app.kind)) return;
        if (auto s = apply_rule(dst, app, max_scale)) out.emplace_back(app, std::move(*s));
    };
    for (std::size_t i = 0; i < dst.trees.size(); ++i) {
        const CtxTree& t = dst.trees[i];
        RuleApp base_app;
        base_app.tree = i;
        if (t.deps.empty() && t.root.exprs.size() == 1) {
            const Expr& e = t.root.exprs[0];
            RuleApp a = base_app;
            switch (e.op()) {
            case Op::Add: a.kind = RuleKind::Add; attempt(a); break;
            case Op::Sqrt: a.kind = RuleKind::Sqrt; attempt(a); break;
            case Op::Sub: a.kind = RuleKind::Sub; attempt(a); break;
            case Op::Div: a.kind = RuleKind::Div; attempt(a); break;
            case Op::Mul: {
                a.kind = RuleKind::Mul;
                attempt(a);
                std::size_t nops = e.lhs().key() == e.rhs().key() ? 1 : 2;
                for (std::size_t o = 0; o < nops; ++o) {
                    RuleApp pr = base_app;
                    pr.kind = RuleKind::Proj2;
                    pr.operand = o;
                    attempt(pr);
                    const Expr& x = o == 0 ? e.lhs() : e.rhs();
                    for (std::size_t j = 0; j < dst.trees.size(); ++j) {
                        if (j == i || !contains(dst.trees[j].root.exprs, x)) continue;
                        for (long n = 1; n <= max_scale; ++n) {
                            RuleApp at = base_app;
                            at.kind = RuleKind::Attach;
                            at.other = j;
                            at.operand = o;
                            at.n = n;
                            attempt(at);
                        }
                    }
                }
                break;
            }
            case Op::Var: break;
            }
        }
        std::size_t k = t.root.exprs.size();
        if (k >= 2 && k <= 16) {
            std::uint64_t full = (std::uint64_t{1} << k) - 1;
            for (std::uint64_t mask = 1; mask < full; ++mask) {
                if (mask & 1) {
                    for (std::uint64_t place = 0; place < (std::uint64_t{1} << t.deps.size()); ++place) {
                        RuleApp a = base_app;
                        a.kind = RuleKind::Share;
                        a.mask = mask;
                        a.aux = place;
                        attempt(a);
                    }
                }
                for (long n = 1; n <= max_scale; ++n) {
                    RuleApp a = base_app;
                    a.kind = RuleKind::ShareStar;
                    a.mask = mask;
                    a.n = n;
                    attempt(a);
                }
            }
        }
        for (std::size_t di = 0; di < t.deps.size(); ++di) {
            const CtxBase& d = t.deps[di];
            RuleApp a = base_app;
            a.dep = di;
            if (d.exprs.size() == 1) {
                switch (d.exprs[0].op()) {
                case Op::Add: a.kind = RuleKind::AddStar; attempt(a); break;
                case Op::Sqrt: a.kind = RuleKind::SqrtStar; attempt(a); break;
                case Op::Mul:
                    a.kind = RuleKind::MulStar;
                    attempt(a);
                    for (std::size_t o = 0; o < 2; ++o) {
                        RuleApp dm = a;
                        dm.kind = RuleKind::DMul;
                        dm.operand = o;
                        attempt(dm);
                    }
                    break;
                default: break;
                }
            } else if (d.exprs.size() <= 16) {
                std::uint64_t full = (std::uint64_t{1} << d.exprs.size()) - 1;
                for (std::uint64_t mask = 1; mask < full; mask += 2) {
                    RuleApp ds = a;
                    ds.kind = RuleKind::DepShare;
                    ds.mask = mask;
                    attempt(ds);
                }
            }
            for (long m = 0; m <= max_scale; ++m) {
                RuleApp pu = a;
                pu.kind = RuleKind::Push;
                pu.n = m;
                attempt(pu);
            }
        }
    }
    return out;
}

// ---- lens extraction ------------------------------------------------------------

LensSpec permutation_lens(const ShelObject& src, const std::vector<Expr>& src_labels, const ShelObject& tgt,
                          const std::vector<Expr>& tgt_labels) {
    if (src_labels.size() != src.arity() || tgt_labels.size() != tgt.arity() || src.arity() != tgt.arity())
        throw LensError("permutation: label count mismatch");
    std::unordered_map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < src_labels.size(); ++i) at.emplace(src_labels[i].key(), i);
    std::vector<std::size_t> vmap;
    for (const auto& e : tgt_labels) {
        auto it = at.find(e.key());
        if (it == at.end()) throw LensError("permutation: expression " + e.key() + " missing from source");
        vmap.push_back(it->second);
    }
    auto dim_of = [&](std::size_t v) {
        for (const auto& l : src.leaves())
            if (v >= l.value_offset && v < l.value_offset + l.arity) return l.dim;
        throw LensError("permutation: value outside every leaf");
    };
    IntMatrix b(src.dims(), std::vector<long>(tgt.dims(), 0));
    for (const auto& l : tgt.leaves()) b[dim_of(vmap[l.value_offset])][l.dim] = 1;
    return lens_rearrange(src, tgt, vmap, b, "rearrange");
}

namespace {

bool same_labels(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].key() != b[i].key()) return false;
    return true;
}

std::optional<LensSpec> maybe_permutation(const ShelObject& src, const std::vector<Expr>& sl, const ShelObject& tgt,
                                          const std::vector<Expr>& tl) {
    if (src == tgt && same_labels(sl, tl)) return std::nullopt;
    return permutation_lens(src, sl, tgt, tl);
}

}  // namespace

LensSpec step_lens(const DerivationStep& step) {
    auto a = apply_impl(step.dst, step.app, 1 << 20, true);
    if (!a || !a->core) throw std::logic_error("step does not replay: " + step.app.str());
    if (serialize(a->src) != serialize(step.src)) throw std::logic_error("step replays to a different context");
    const Core& core = *a->core;
    Ctx rest;
    for (std::size_t i = 0; i < step.dst.trees.size(); ++i)
        if (std::find(core.involved.begin(), core.involved.end(), i) == core.involved.end())
            rest.trees.push_back(step.dst.trees[i]);
    ShelObject rest_obj = interpret(rest);
    std::vector<Expr> rest_labels = value_labels(rest);
    ShelObject mid_src = ShelObject::tensor(core.lens.source(), rest_obj);
    ShelObject mid_tgt = ShelObject::tensor(core.lens.target(), rest_obj);
    std::vector<LensSpec> chain;
    if (auto l = maybe_permutation(interpret(step.src), value_labels(step.src), mid_src, cat(core.src_labels, rest_labels)))
        chain.push_back(*l);
    chain.push_back(rest.trees.empty() ? core.lens : parallel(core.lens, lens_id(rest_obj)));
    if (auto l = maybe_permutation(mid_tgt, cat(core.tgt_labels, rest_labels), interpret(step.dst), value_labels(step.dst)))
        chain.push_back(*l);
    return compose(chain);
}

LensSpec derivation_to_lens(const Derivation& d) {
    if (d.steps.empty()) return lens_id(interpret(d.goal));
    std::vector<LensSpec> chain;
    for (const auto& s : d.steps) chain.push_back(step_lens(s));
    return compose(chain);
}

std::string Derivation::to_text() const {
    std::string s = "program " + print(program) + "\n";
    s += "start   " + serialize(start) + "\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        s += std::to_string(i + 1) + ". " + steps[i].app.str() + "\n";
        s += "     " + serialize(steps[i].src) + "\n";
        s += "  => " + serialize(steps[i].dst) + "\n";
    }
    s += "goal    " + serialize(goal) + "\n";
    return s;
}

// ---- fact database ------------------------------------------------------------------

FactDb FactDb::seed(const Expr& e, bool allow_sub_div) {
    bool ok = allow_sub_div ? uses_only(e, {Op::Var, Op::Add, Op::Mul, Op::Sqrt, Op::Sub, Op::Div})
                            : uses_only(e, {Op::Var, Op::Add, Op::Mul, Op::Sqrt});
    if (!ok) throw UnsupportedOperator("program uses an operator outside Add, Mul, Sqrt");
    FactDb db;
    db.program_ = canonical(e);
    Ctx goal = goal_context(db.program_);
    Fact f;
    f.key = serialize(goal);
    f.ctx = std::move(goal);
    db.by_key_.emplace(f.key, 0);
    db.by_shape_[shape_key(f.ctx)].push_back(0);
    db.bounds_.push_back(bound_vector(f.ctx));
    db.facts_.push_back(std::move(f));
    db.stats_.facts = 1;
    return db;
}

std::optional<std::size_t> FactDb::find(const Ctx& g) const {
    auto it = by_key_.find(serialize(canonicalize(g)));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

namespace {

bool leq(const std::vector<Bound>& a, const std::vector<Bound>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i]) return false;
    return true;
}

}  // namespace

bool FactDb::insert(Ctx g, long parent, const RuleApp& app, const EngineConfig& cfg) {
    auto bv = bound_vector(g);
    for (const auto& b : bv)
        if (b > cfg.bound_cap) {
            ++stats_.pruned;
            return false;
        }
    std::string key = serialize(g);
    if (by_key_.count(key)) return false;
    // Every backward rule is monotone in the bounds, so a context with
    // componentwise larger bounds than a known one of the same shape cannot
    // lead to a better start context.
    auto& group = by_shape_[shape_key(g)];
    for (std::size_t f : group)
        if (leq(bounds_[f], bv)) {
            ++stats_.pruned;
            return false;
        }
    std::vector<std::size_t> keep;
    for (std::size_t f : group) {
        if (leq(bv, bounds_[f])) facts_[f].subsumed = true;
        else keep.push_back(f);
    }
    group = std::move(keep);
    std::size_t id = facts_.size();
    group.push_back(id);
    by_key_.emplace(key, id);
    Fact f;
    f.ctx = std::move(g);
    f.key = std::move(key);
    f.parent = parent;
    f.app = app;
    f.depth = parent >= 0 ? facts_[static_cast<std::size_t>(parent)].depth + 1 : 0;
    facts_.push_back(std::move(f));
    bounds_.push_back(std::move(bv));
    stats_.facts = facts_.size();
    return true;
}

void FactDb::saturate(const EngineConfig& cfg) {
    max_scale_ = cfg.max_scale > 0 ? cfg.max_scale : auto_max_scale(program_);
    bool capped = false;
    auto start = std::chrono::steady_clock::now();
    while (next_ < facts_.size()) {
        if (stats_.iterations >= cfg.max_iterations || facts_.size() >= cfg.max_facts) {
            capped = true;
            break;
        }
        if (cfg.time_limit_s > 0 && stats_.iterations % 256 == 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > cfg.time_limit_s) {
            capped = true;
            stats_.timed_out = true;
            break;
        }
        std::size_t idx = next_++;
        if (facts_[idx].subsumed) continue;
        ++stats_.iterations;
        auto preds = predecessors(facts_[idx].ctx, cfg.rules, max_scale_);
        for (auto& [app, s] : preds) insert(std::move(s), static_cast<long>(idx), app, cfg);
    }
    stats_.saturated = !capped && next_ == facts_.size();
}

std::vector<BoundReport> FactDb::query(bool all) const {
    std::map<std::string, BoundReport> found;  // keyed by context, for a stable order
    for (std::size_t i = 0; i < facts_.size(); ++i) {
        if (facts_[i].subsumed && !all) continue;
        auto b = is_start_context(facts_[i].ctx, program_);
        if (!b) continue;
        found.emplace(facts_[i].key, BoundReport{std::move(*b), i, false});
    }
    std::vector<BoundReport> out;
    for (auto& [k, r] : found) out.push_back(std::move(r));
    if (!all) {
        std::vector<BoundReport> pareto;
        for (const auto& r : out) {
            bool dominated = false;
            for (const auto& o : out) {
                if (&o == &r) continue;
                bool le = true, lt = false;
                for (const auto& [v, b] : r.bounds) {
                    const Bound& ob = o.bounds.at(v);
                    if (ob > b) le = false;
                    if (ob < b) lt = true;
                }
                if (le && lt) dominated = true;
            }
            if (!dominated) pareto.push_back(r);
        }
        out = std::move(pareto);
    }
    if (!out.empty()) {
        Bound best = out[0].max_bound();
        for (const auto& r : out) best = std::min(best, r.max_bound());
        for (auto& r : out) r.smallest_max = r.max_bound() == best;
    }
    return out;
}

Derivation FactDb::extract_derivation(std::size_t fact) const {
    if (fact >= facts_.size()) throw std::out_of_range("no such fact");
    Derivation d;
    d.program = program_;
    d.start = facts_[fact].ctx;
    d.goal = facts_[0].ctx;
    std::size_t cur = fact;
    while (facts_[cur].parent >= 0) {
        std::size_t par = static_cast<std::size_t>(facts_[cur].parent);
        d.steps.push_back(DerivationStep{facts_[cur].app, facts_[cur].ctx, facts_[par].ctx});
        cur = par;
    }
    return d;
}

Derivation FactDb::extract_derivation(const BoundReport& r) const { return extract_derivation(r.fact); }

long scale_demand(const Expr& e) {
    switch (e.op()) {
    case Op::Var: return 0;
    case Op::Sqrt: return 2 * scale_demand(e.lhs());
    case Op::Mul: return std::max<long>(1, std::max(scale_demand(e.lhs()), scale_demand(e.rhs())));
    default: return std::max(scale_demand(e.lhs()), scale_demand(e.rhs()));
    }
}

long auto_max_scale(const Expr& e) { return std::max<long>(1, scale_demand(e)); }

Analysis analyze(const Expr& e, const EngineConfig& cfg, bool all_bounds) {
    FactDb db = FactDb::seed(e, cfg.rules.sub_div);
    db.saturate(cfg);
    auto reports = db.query(all_bounds);
    EngineStats st = db.stats();
    return Analysis{db.program(), std::move(reports), st, std::move(db)};
}

}  // namespace shel
