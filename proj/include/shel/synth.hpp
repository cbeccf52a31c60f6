#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "shel/bound.hpp"
#include "shel/context.hpp"
#include "shel/expr.hpp"
#include "shel/lens.hpp"

namespace shel {

class UnsupportedOperator : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class RuleKind : std::uint8_t {
    Add,       // standalone [Add(l,r)]_p  <-  [l,r]_(p+1)
    Mul,       // standalone [Mul(l,r)]_p  <-  [l,r]_((p+1)/2)
    Sqrt,      // standalone [Sqrt e]_p    <-  [e]_(2p+2)
    Sub,       // experimental
    Div,       // experimental
    Share,     // root split into two trees (share on tensor)
    ShareStar, // root split into root *n dependent
    DepShare,  // dependent split into two dependents of the same scale
    AddStar,
    MulStar,
    SqrtStar,
    Push,      // dependent scale m -> n; m = 0 detaches
    Attach,    // standalone [Mul(x,y)] becomes a dependent of the tree whose root binds x
    DMul,      // dependent Mul(x,y) at n+1 with x in the root  <-  y at n
    Proj2,     // standalone [Mul(x,y)]  <-  [x]_0 *1 [Mul(x,y)]
};

const char* rule_name(RuleKind k);

struct RuleSet {
    bool add = true, mul = true, sqrt = true;
    bool share = true, share_star = true, dep_share = true;
    bool add_star = true, mul_star = true, sqrt_star = true;
    bool push = true, attach = true, dmul = true, proj2 = true;
    bool sub_div = false;  // experimental, not used for acceptance

    bool enabled(RuleKind k) const;
    void set(RuleKind k, bool on);
    // Comma-separated rule names; "all" and "default" are accepted, and a
    // leading '-' disables a rule.
    static RuleSet parse(const std::string& spec);
    static std::vector<RuleKind> all_kinds();
};

struct EngineConfig {
    std::size_t max_iterations = 1'000'000;
    std::size_t max_facts = 1'000'000;
    Bound bound_cap = 64;
    long max_scale = 0;  // 0: auto_max_scale(program)
    double time_limit_s = 0;  // wall clock; 0: none
    RuleSet rules;
};

// One backward rule instance, applied to the context nearer the goal.
struct RuleApp {
    RuleKind kind = RuleKind::Add;
    std::size_t tree = 0;   // target tree
    std::size_t dep = 0;    // dependent index within the tree
    std::size_t other = 0;  // second tree (Attach: tree whose root binds the operand)
    std::uint64_t mask = 0; // expression subset (Share*, DepShare) or dependent placement (Share)
    std::uint64_t aux = 0;
    long n = 0;             // scale parameter
    std::size_t operand = 0;

    std::string str() const;
};

struct Fact {
    Ctx ctx;
    std::string key;
    long parent = -1;  // fact this one was derived from; -1 for the goal
    RuleApp app;
    std::size_t depth = 0;
    bool subsumed = false;
};

struct BoundReport {
    std::map<std::string, Bound> bounds;
    std::size_t fact = 0;
    bool smallest_max = false;
    Bound max_bound() const;
    std::string str() const;
};

struct EngineStats {
    std::size_t facts = 0;
    std::size_t iterations = 0;
    std::size_t pruned = 0;
    bool saturated = false;
    bool timed_out = false;
};

struct DerivationStep {
    RuleApp app;
    Ctx src;  // nearer the inputs
    Ctx dst;  // nearer the goal
};

// Linear chain of rule applications, from the start context to the goal.
struct Derivation {
    Expr program;
    std::vector<DerivationStep> steps;
    Ctx start;
    Ctx goal;
    std::string to_text() const;
};

class FactDb {
public:
    // Throws UnsupportedOperator unless e uses only Add, Mul, Sqrt (plus Sub
    // and Div when allow_sub_div).
    static FactDb seed(const Expr& e, bool allow_sub_div = false);

    void saturate(const EngineConfig& cfg);
    // Pareto-minimal start contexts (every one found when all is set);
    // ordered by canonical context key.
    std::vector<BoundReport> query(bool all = false) const;
    Derivation extract_derivation(const BoundReport& r) const;
    Derivation extract_derivation(std::size_t fact) const;

    const Expr& program() const { return program_; }
    const EngineStats& stats() const { return stats_; }
    const std::vector<Fact>& facts() const { return facts_; }
    long max_scale() const { return max_scale_; }
    std::optional<std::size_t> find(const Ctx& g) const;

private:
    Expr program_;
    std::vector<Fact> facts_;
    std::vector<std::vector<Bound>> bounds_;
    std::unordered_map<std::string, std::size_t> by_key_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_shape_;
    std::size_t next_ = 0;
    long max_scale_ = 1;
    EngineStats stats_;

    bool insert(Ctx g, long parent, const RuleApp& app, const EngineConfig& cfg);
};

// Predecessor of `dst` under `app`, canonical, or nullopt when the rule does
// not apply (wrong shape, duplicate expressions).
std::optional<Ctx> apply_rule(const Ctx& dst, const RuleApp& app, long max_scale);
// Every enabled rule instance applicable to dst.
std::vector<std::pair<RuleApp, Ctx>> predecessors(const Ctx& dst, const RuleSet& rules, long max_scale);

// Lens interpret(step.src) -> interpret(step.dst).
LensSpec step_lens(const DerivationStep& step);
// Lens interpret(d.start) -> interpret(d.goal).
LensSpec derivation_to_lens(const Derivation& d);

// Structural isomorphism between two objects binding the same expressions,
// matched by canonical key. Throws LensError when the actions disagree.
LensSpec permutation_lens(const ShelObject& src, const std::vector<Expr>& src_labels, const ShelObject& tgt,
                          const std::vector<Expr>& tgt_labels);

// Largest push-product scale the rules may introduce: one per multiplication,
// doubled under each square root.
long scale_demand(const Expr& e);
long auto_max_scale(const Expr& e);

struct Analysis {
    Expr program;
    std::vector<BoundReport> reports;
    EngineStats stats;
    FactDb db;
};

Analysis analyze(const Expr& e, const EngineConfig& cfg = {}, bool all_bounds = false);

}  // namespace shel
