#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shel {

enum class Op : std::uint8_t { Var, Sqrt, Add, Mul, Sub, Div };

const char* op_name(Op op);
inline bool is_binary(Op op) { return op != Op::Var && op != Op::Sqrt; }
inline bool is_commutative(Op op) { return op == Op::Add || op == Op::Mul; }

// Immutable expression tree. Nodes are shared; copying an Expr is cheap.
class Expr {
public:
    Expr() = default;

    static Expr var(std::string name);
    static Expr sqrt(Expr child);
    static Expr add(Expr l, Expr r) { return binary(Op::Add, std::move(l), std::move(r)); }
    static Expr mul(Expr l, Expr r) { return binary(Op::Mul, std::move(l), std::move(r)); }
    static Expr sub(Expr l, Expr r) { return binary(Op::Sub, std::move(l), std::move(r)); }
    static Expr div(Expr l, Expr r) { return binary(Op::Div, std::move(l), std::move(r)); }
    static Expr binary(Op op, Expr l, Expr r);

    bool empty() const { return !n_; }
    Op op() const;
    const std::string& name() const;
    // Sqrt keeps its operand in lhs.
    const Expr& lhs() const;
    const Expr& rhs() const;
    std::size_t arity() const { return is_binary(op()) ? 2 : op() == Op::Sqrt ? 1 : 0; }

    // Serialization with Add/Mul operands sorted; equal keys mean equal up to
    // commutativity.
    const std::string& key() const;
    std::size_t hash() const;
    std::size_t size() const;
    const void* id() const { return n_.get(); }

    friend bool operator==(const Expr& a, const Expr& b);
    friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

private:
    struct Node;
    std::shared_ptr<const Node> n_;
    static Expr finish(std::shared_ptr<Node> n);
};

struct Expr::Node {
    Op op = Op::Var;
    std::string name;
    Expr kids[2];
    std::string key;
    std::size_t hash = 0;
    std::size_t size = 1;
};

inline Op Expr::op() const { return n_->op; }
inline const std::string& Expr::name() const { return n_->name; }
inline const Expr& Expr::lhs() const { return n_->kids[0]; }
inline const Expr& Expr::rhs() const { return n_->kids[1]; }
inline const std::string& Expr::key() const { return n_->key; }
inline std::size_t Expr::hash() const { return n_->hash; }
inline std::size_t Expr::size() const { return n_->size; }

// Orders by canonical key.
struct ExprKeyLess {
    bool operator()(const Expr& a, const Expr& b) const { return a.key() < b.key(); }
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t pos, const std::string& msg);
    std::size_t position() const { return pos_; }

private:
    std::size_t pos_;
};

Expr parse_expr(std::string_view text);
std::string print(const Expr& e);
std::vector<std::string> free_vars(const Expr& e);
// Rebuilds e with Add/Mul operands in key order.
Expr canonical(const Expr& e);
bool equivalent(const Expr& a, const Expr& b);
bool uses_only(const Expr& e, std::initializer_list<Op> ops);
// Largest number of Mul nodes on a root-to-leaf path.
std::size_t mul_depth(const Expr& e);

}  // namespace shel
