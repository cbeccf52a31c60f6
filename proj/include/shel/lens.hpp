#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "shel/bound.hpp"
#include "shel/ext_real.hpp"
#include "shel/numerics.hpp"
#include "shel/object.hpp"

namespace shel {

using RatVec = std::vector<mpq_class>;
using RatMatrix = std::vector<RatVec>;

// Raised when a lens is built with mismatched shapes or violated bound side
// conditions.
class LensError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Env {
    RoundingModel model;
    prec_t prec;
    EvalOptions opt;
};

// Per-node record of a float forward run, consumed by the backward map.
struct Trace {
    std::vector<double> in;
    std::vector<ExtReal> deltas;
    std::vector<Trace> kids;
};

// b(t) = A t + c(delta) where c only touches dims flagged in `offset`.
struct Affine {
    RatMatrix a;  // src dims x tgt dims
    std::vector<bool> offset;
};

class LensNode {
public:
    LensNode(ShelObject src, ShelObject tgt) : src_(std::move(src)), tgt_(std::move(tgt)) {}
    virtual ~LensNode() = default;
    const ShelObject& source() const { return src_; }
    const ShelObject& target() const { return tgt_; }

    virtual std::string name() const = 0;
    virtual std::string describe() const { return name(); }
    virtual std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const = 0;
    virtual std::vector<double> forward_float(const std::vector<double>& x, const Env& env, Trace& tr) const = 0;
    virtual Shift backward(const Shift& t, const Trace& tr, prec_t prec) const = 0;
    virtual std::optional<Affine> affine() const = 0;
    // If f(x * tau v) = f(x) * tau w for all x and real tau, returns w.
    virtual std::optional<RatVec> transport(const RatVec& v) const = 0;

protected:
    ShelObject src_, tgt_;
};

}  // namespace detail

// Immutable, shareable lens description (f, f~, b) between two objects.
class LensSpec {
public:
    explicit LensSpec(std::shared_ptr<const detail::LensNode> n) : n_(std::move(n)) {}
    const ShelObject& source() const { return n_->source(); }
    const ShelObject& target() const { return n_->target(); }
    // Stable catalog identifier, e.g. "add", "dmul:1", "share_star:2".
    std::string name() const { return n_->name(); }
    std::string describe() const { return n_->describe(); }
    std::vector<ExtReal> forward_exact(const std::vector<ExtReal>& x) const;
    const detail::LensNode& node() const { return *n_; }
    const std::shared_ptr<const detail::LensNode>& ptr() const { return n_; }

private:
    std::shared_ptr<const detail::LensNode> n_;
};

// Primitive lenses; bounds are target bounds, the source bound follows.
LensSpec lens_add(const Bound& p);
LensSpec lens_sub(const Bound& p);
LensSpec lens_mul(const Bound& p);
LensSpec lens_div(const Bound& p);
LensSpec lens_sqrt(const Bound& p);
LensSpec lens_log(const Bound& p, const RoundingModel& m);
// Root is a shared base of root_arity values; the product uses root value
// root_index.
LensSpec lens_dmul(long n, const Bound& p, const Bound& q, std::size_t root_arity = 1, std::size_t root_index = 0);
LensSpec lens_adddiv(const Bound& p1, const Bound& p2, long i = 1);

// Structural lenses.
LensSpec lens_id(const ShelObject& x);
// Identity with larger source bounds.
LensSpec lens_weaken(const ShelObject& src, const ShelObject& tgt);
LensSpec lens_dup(const Bound& p, std::size_t arity = 1);
LensSpec lens_share_tensor(const ShelObject& a, const ShelObject& b);
// Star(root, dep, n) -> Base(root ++ dep); dep bound must be >= |n-1| * root bound.
LensSpec lens_share_star(long n, const ShelObject& root, const ShelObject& dep);
// root *_i dep' -> root *_j dep, with dep' bounds = dep bounds + |i-j| * root bound.
LensSpec lens_push(long i, long j, const ShelObject& root, const ShelObject& dep);
LensSpec lens_proj1(const ShelObject& star);
LensSpec lens_proj2(const ShelObject& star);
// (X1 *i Y1) x (X2 *j Y2) -> (X1 x X2) *(i,j) (Y1 x Y2)
LensSpec lens_dist(const ShelObject& a, const ShelObject& b);
LensSpec lens_swap(const ShelObject& a, const ShelObject& b);
// (a x b) x c -> a x (b x c)
LensSpec lens_assoc(const ShelObject& a, const ShelObject& b, const ShelObject& c);
// I x x -> x
LensSpec lens_unitor(const ShelObject& x);
// Coherence isomorphism: target value i is source value vmap[i]; the
// backward map is t -> bmat * t (src dims x tgt dims). Checked exactly.
LensSpec lens_rearrange(const ShelObject& src, const ShelObject& tgt, const std::vector<std::size_t>& vmap,
                        const IntMatrix& bmat, const std::string& label = "rearrange");

LensSpec compose(const LensSpec& first, const LensSpec& second);
LensSpec compose(const std::vector<LensSpec>& chain);
LensSpec parallel(const LensSpec& l, const LensSpec& r);
// l acts on the root, r on the dependent; `hom` is the source star's
// homomorphism. The target homomorphism is derived; throws LensError when the
// side condition cannot be discharged.
LensSpec parallel_star(const LensSpec& l, const LensSpec& r, const IntMatrix& hom);
LensSpec parallel_star(const LensSpec& l, const LensSpec& r, long n);

// Same lens, different claimed source object. No checks: for negative tests.
LensSpec relabel_unchecked(const LensSpec& l, const ShelObject& src);

class LensInstance {
public:
    LensInstance(LensSpec spec, std::vector<double> inputs, const RoundingModel& m, prec_t prec,
                 const EvalOptions& opt = {});

    const LensSpec& spec() const { return spec_; }
    const std::vector<double>& inputs() const { return inputs_; }
    const std::vector<double>& outputs() const { return outputs_; }
    // All recorded deltas in forward order.
    std::vector<ExtReal> deltas() const;
    prec_t precision() const { return env_.prec; }
    const RoundingModel& model() const { return env_.model; }
    // Throws std::out_of_range if |t_k| exceeds the target bound.
    Shift backward(const Shift& t) const;
    // inputs acted on by backward(0)
    std::vector<ExtReal> witness() const;

private:
    LensSpec spec_;
    detail::Env env_;
    std::vector<double> inputs_, outputs_;
    detail::Trace trace_;
};

LensInstance bind(const LensSpec& l, const std::vector<double>& inputs, const RoundingModel& m,
                  prec_t prec = kDefaultPrecision, const EvalOptions& opt = {});

using Sampler = std::function<std::vector<double>(const ShelObject&, std::mt19937_64&)>;
// Magnitudes log-uniform in [2^lo, 2^hi], random signs unless positive.
Sampler log_uniform_sampler(bool positive = false, int lo = -30, int hi = 30);
Sampler uniform_sampler(double lo, double hi);
double draw_log_uniform(std::mt19937_64& rng, bool positive, int lo = -30, int hi = 30);

struct CheckReport {
    std::string lens;
    std::size_t samples = 0;
    std::size_t failures = 0;
    std::size_t resampled = 0;
    double max_residual_log2 = -1e300;  // log2 of the largest RP residual
    double max_norm_ratio = 0;          // max |b_j(t)| / (p_j eps), informational
    std::string counterexample;
    bool passed() const { return samples > 0 && failures == 0; }
};

CheckReport check_conditions(const LensSpec& l, std::size_t n_samples, const RoundingModel& m,
                             prec_t prec = kDefaultPrecision, const Sampler& sampler = log_uniform_sampler(),
                             std::uint64_t seed = 1, const EvalOptions& opt = {});

struct CatalogEntry {
    std::string id;
    LensSpec lens;
    Sampler sampler;
};

// Every primitive and structural lens at a few bound settings.
std::vector<CatalogEntry> lens_catalog(const RoundingModel& m);

}  // namespace shel
