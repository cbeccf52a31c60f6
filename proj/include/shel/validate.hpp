#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shel/bound.hpp"
#include "shel/expr.hpp"
#include "shel/lens.hpp"
#include "shel/numerics.hpp"
#include "shel/synth.hpp"

namespace shel {

struct StabilityReport {
    std::string program;
    std::vector<std::string> vars;       // source value order
    std::map<std::string, Bound> claimed;
    std::size_t samples = 0;
    std::size_t resampled = 0;
    std::size_t failures = 0;
    std::map<std::string, double> max_ratio;  // max RP(x_i, witness_i) / eps
    double max_residual_log2 = -1e300;
    std::vector<std::string> counterexamples;  // first few only
    bool passed() const { return samples > 0 && failures == 0; }
    std::string to_json(int indent = 2) const;
};

struct CertifyOptions {
    std::size_t samples = 1000;
    prec_t prec = kDefaultPrecision;
    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0: hardware concurrency
    EvalOptions eval;
};

// Certifies `lens` as a witness builder for e: the lens forward float map must
// agree bitwise with eval_float(e), the witness must reproduce the float
// output exactly (RP residual <= 2^-(P/2)), and each RP(x_i, witness_i) must
// stay within claimed_i * eps + 2^-(P-16). `vars` names each source value.
StabilityReport certify_lens(const Expr& e, const LensSpec& lens, const std::vector<std::string>& vars,
                             const std::map<std::string, Bound>& claimed, const RoundingModel& m,
                             const Sampler& sampler, const CertifyOptions& opt = {});

// Throws std::invalid_argument if the derivation's start context does not
// carry the report's bounds.
StabilityReport certify(const Expr& e, const BoundReport& report, const Derivation& d, const RoundingModel& m,
                        const Sampler& sampler, const CertifyOptions& opt = {});

// Every report of analyze(e), certified in turn.
std::vector<StabilityReport> certify_all(const Analysis& a, const RoundingModel& m, const Sampler& sampler,
                                         const CertifyOptions& opt = {});

// Closed-form witness for fl(fl(x1*y1) + fl(x2*y2)): each factor of term k is
// scaled by exp((delta_k + delta_3) / 2). Returned as (x1, x2, y1, y2).
std::array<ExtReal, 4> oracle_dotprod(double x1, double x2, double y1, double y2, const RoundingModel& m,
                                      prec_t prec = kDefaultPrecision);

struct CaseStudy {
    std::string name;
    Expr program;
    LensSpec lens;
    std::vector<std::string> vars;
    std::map<std::string, Bound> expected;
    Sampler sampler;
};

// Hand-assembled pipelines: x+xy, x+ax^2, Cholesky l22, weighted average
// (push and adddiv variants).
std::vector<CaseStudy> case_study_pipelines();

// Sampler for symmetric positive definite 2x2 entries (a11, a21, a22).
Sampler spd_sampler();

struct AuditReport {
    Op op = Op::Add;
    std::size_t samples = 0;
    std::size_t violations = 0;
    double max_delta_over_eps = 0;
    std::string worst;
    bool passed() const { return samples > 0 && violations == 0; }
};

// Draws normal-range operands (results kept in range) and checks
// |ln(computed / exact)| <= eps for every single rounding.
AuditReport audit_rounding(Op op, std::size_t n, const RoundingModel& m, prec_t prec = kDefaultPrecision,
                           std::uint64_t seed = 1, unsigned threads = 0);

}  // namespace shel
