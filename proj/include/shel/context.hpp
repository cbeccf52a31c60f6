#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shel/bound.hpp"
#include "shel/expr.hpp"
#include "shel/object.hpp"

namespace shel {

class ContextError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// (e1, ..., en : (scale, R^n, bound)). The scale is meaningful only for
// dependents; roots carry 0.
struct CtxBase {
    long scale = 0;
    std::vector<Expr> exprs;
    Bound bound;
};

// root * (dep1 x ... x depm), height one.
struct CtxTree {
    CtxBase root;
    std::vector<CtxBase> deps;
};

// Tensor of trees; empty is the unit context.
struct Ctx {
    std::vector<CtxTree> trees;
};

CtxBase make_base(std::vector<Expr> exprs, Bound bound, long scale = 0);
CtxTree make_tree(CtxBase root, std::vector<CtxBase> deps = {});

// Throws ContextError describing the first violation.
void check_well_formed(const Ctx& g);
bool well_formed(const Ctx& g);

// Sorted expressions within bases, sorted dependents, sorted trees; scale-0
// dependents become their own trees (a 0-scale push product is a tensor).
Ctx canonicalize(Ctx g);

// (Base i e p), (Star root deps), (Tens a b); expressions by canonical key.
std::string serialize(const Ctx& g);
std::string serialize(const CtxTree& t);
// Serialization with every bound erased.
std::string shape_key(const Ctx& g);
std::string shape_key(const CtxTree& t);

// Bounds in the shift-dimension order of interpret(g).
std::vector<Bound> bound_vector(const Ctx& g);
std::size_t expr_count(const Ctx& g);

ShelObject interpret(const CtxBase& b);
ShelObject interpret(const CtxTree& t);
ShelObject interpret(const Ctx& g);
// Expression bound to each value of interpret(...), in value order.
std::vector<Expr> value_labels(const CtxTree& t);
std::vector<Expr> value_labels(const Ctx& g);

Ctx goal_context(const Expr& e);
Ctx start_context(const std::map<std::string, Bound>& bounds);
// Per-variable bounds if g is a tensor of single-variable bases covering
// exactly the free variables of e.
std::optional<std::map<std::string, Bound>> is_start_context(const Ctx& g, const Expr& e);

}  // namespace shel
