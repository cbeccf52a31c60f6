#include "shel/expr.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <unordered_set>

namespace shel {

const char* op_name(Op op) {
    switch (op) {
    case Op::Var: return "Var";
    case Op::Sqrt: return "Sqrt";
    case Op::Add: return "Add";
    case Op::Mul: return "Mul";
    case Op::Sub: return "Sub";
    case Op::Div: return "Div";
    }
    return "?";
}

namespace {

bool valid_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '\'';
    });
}

}  // namespace

Expr Expr::finish(std::shared_ptr<Node> n) {
    if (n->op == Op::Var) {
        n->key = n->name;
    } else if (n->op == Op::Sqrt) {
        n->key = "(Sqrt " + n->kids[0].key() + ")";
        n->size = 1 + n->kids[0].size();
    } else {
        const std::string* a = &n->kids[0].key();
        const std::string* b = &n->kids[1].key();
        if (is_commutative(n->op) && *b < *a) std::swap(a, b);
        n->key = std::string("(") + op_name(n->op) + " " + *a + " " + *b + ")";
        n->size = 1 + n->kids[0].size() + n->kids[1].size();
    }
    n->hash = std::hash<std::string>()(n->key);
    Expr e;
    e.n_ = std::move(n);
    return e;
}

Expr Expr::var(std::string name) {
    if (!valid_identifier(name)) throw std::invalid_argument("invalid variable name '" + name + "'");
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->name = std::move(name);
    return finish(std::move(n));
}

Expr Expr::sqrt(Expr child) {
    if (child.empty()) throw std::invalid_argument("Sqrt of empty expression");
    auto n = std::make_shared<Node>();
    n->op = Op::Sqrt;
    n->kids[0] = std::move(child);
    return finish(std::move(n));
}

Expr Expr::binary(Op op, Expr l, Expr r) {
    if (!is_binary(op)) throw std::invalid_argument("not a binary operator");
    if (l.empty() || r.empty()) throw std::invalid_argument("binary operator on empty expression");
    auto n = std::make_shared<Node>();
    n->op = op;
    n->kids[0] = std::move(l);
    n->kids[1] = std::move(r);
    return finish(std::move(n));
}

bool operator==(const Expr& a, const Expr& b) {
    if (a.n_ == b.n_) return true;
    if (!a.n_ || !b.n_) return false;
    if (a.op() != b.op() || a.hash() != b.hash() || a.size() != b.size()) return false;
    switch (a.op()) {
    case Op::Var: return a.name() == b.name();
    case Op::Sqrt: return a.lhs() == b.lhs();
    default: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    }
}

ParseError::ParseError(std::size_t pos, const std::string& msg)
    : std::runtime_error("parse error at " + std::to_string(pos) + ": " + msg), pos_(pos) {}

namespace {

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    Expr parse_all() {
        Expr e = parse();
        skip();
        if (i_ != s_.size()) throw ParseError(i_, "trailing input");
        return e;
    }

private:
    std::string_view s_;
    std::size_t i_ = 0;

    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }

    std::string_view atom() {
        std::size_t b = i_;
        while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != '(' &&
               s_[i_] != ')')
            ++i_;
        return s_.substr(b, i_ - b);
    }

    Expr parse() {
        skip();
        if (i_ >= s_.size()) throw ParseError(i_, "unexpected end of input");
        if (s_[i_] == ')') throw ParseError(i_, "unexpected ')'");
        if (s_[i_] != '(') {
            std::size_t at = i_;
            std::string_view a = atom();
            if (!valid_identifier(a)) throw ParseError(at, "invalid identifier '" + std::string(a) + "'");
            return Expr::var(std::string(a));
        }
        std::size_t open = i_++;
        skip();
        std::size_t at = i_;
        std::string_view head = atom();
        if (head.empty()) throw ParseError(at, "missing operator");
        Expr e;
        if (head == "Sqrt") {
            e = Expr::sqrt(parse());
        } else {
            Op op;
            if (head == "Add") op = Op::Add;
            else if (head == "Mul") op = Op::Mul;
            else if (head == "Sub") op = Op::Sub;
            else if (head == "Div") op = Op::Div;
            else throw ParseError(at, "unknown operator '" + std::string(head) + "'");
            Expr l = parse();
            Expr r = parse();
            e = Expr::binary(op, std::move(l), std::move(r));
        }
        skip();
        if (i_ >= s_.size()) throw ParseError(open, "unbalanced '('");
        if (s_[i_] != ')') throw ParseError(i_, "expected ')'");
        ++i_;
        return e;
    }
};

void print_into(const Expr& e, std::string& out) {
    if (e.op() == Op::Var) {
        out += e.name();
        return;
    }
    out += '(';
    out += op_name(e.op());
    for (std::size_t k = 0; k < e.arity(); ++k) {
        out += ' ';
        print_into(k == 0 ? e.lhs() : e.rhs(), out);
    }
    out += ')';
}

}  // namespace

Expr parse_expr(std::string_view text) { return Parser(text).parse_all(); }

std::string print(const Expr& e) {
    std::string out;
    print_into(e, out);
    return out;
}

std::vector<std::string> free_vars(const Expr& e) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    std::function<void(const Expr&)> go = [&](const Expr& x) {
        if (x.op() == Op::Var) {
            if (seen.insert(x.name()).second) out.push_back(x.name());
            return;
        }
        for (std::size_t k = 0; k < x.arity(); ++k) go(k == 0 ? x.lhs() : x.rhs());
    };
    go(e);
    return out;
}

Expr canonical(const Expr& e) {
    switch (e.op()) {
    case Op::Var: return e;
    case Op::Sqrt: return Expr::sqrt(canonical(e.lhs()));
    default: {
        Expr l = canonical(e.lhs());
        Expr r = canonical(e.rhs());
        if (is_commutative(e.op()) && r.key() < l.key()) std::swap(l, r);
        return Expr::binary(e.op(), std::move(l), std::move(r));
    }
    }
}

bool equivalent(const Expr& a, const Expr& b) { return a.key() == b.key(); }

bool uses_only(const Expr& e, std::initializer_list<Op> ops) {
    if (e.op() != Op::Var && std::find(ops.begin(), ops.end(), e.op()) == ops.end()) return false;
    for (std::size_t k = 0; k < e.arity(); ++k)
        if (!uses_only(k == 0 ? e.lhs() : e.rhs(), ops)) return false;
    return true;
}

std::size_t mul_depth(const Expr& e) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < e.arity(); ++k) best = std::max(best, mul_depth(k == 0 ? e.lhs() : e.rhs()));
    return best + (e.op() == Op::Mul ? 1 : 0);
}

}  // namespace shel
