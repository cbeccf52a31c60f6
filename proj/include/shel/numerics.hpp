#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "shel/ext_real.hpp"
#include "shel/expr.hpp"

namespace shel {

enum class Format { Binary32, Binary64 };

struct RoundingModel {
    Format format = Format::Binary64;
    mpq_class u;
    mpq_class eps;         // u / (1 - u)
    mpq_class max_finite;  // largest finite value
    int precision_bits = 53;
    double min_normal = 0;
};

RoundingModel unit_roundoff(Format f);
Format parse_format(const std::string& name);
const char* format_name(Format f);

struct EvalOptions {
    // Sqrt of a negative argument is an error instead of sqrt(|x|).
    bool strict_sqrt = false;
};

class EvalError : public std::runtime_error {
public:
    static constexpr std::size_t kNoSite = static_cast<std::size_t>(-1);
    EvalError(std::size_t site, const std::string& msg);
    std::size_t site() const { return site_; }

private:
    std::size_t site_;
};

using Valuation = std::map<std::string, double>;
using RealValuation = std::map<std::string, ExtReal>;

struct DeltaEntry {
    std::size_t site;  // post-order index of the operator node
    Op op;
    ExtReal delta;
};
using DeltaLog = std::vector<DeltaEntry>;

struct FloatEval {
    double value = 0;
    DeltaLog deltas;
};

ExtReal eval_real(const Expr& e, const Valuation& v, prec_t prec, const EvalOptions& opt = {});
ExtReal eval_real(const Expr& e, const RealValuation& v, prec_t prec, const EvalOptions& opt = {});
FloatEval eval_float(const Expr& e, const Valuation& v, const RoundingModel& m, prec_t prec = kDefaultPrecision,
                     const EvalOptions& opt = {});

// One rounding site: machine result plus delta = ln(computed / exact), the
// exact op applied at `prec` to the received arguments.
struct Rounded {
    double value;
    ExtReal delta;
};

// Exact op on extended values. Sqrt ignores b.
ExtReal exact_op(Op op, const ExtReal& a, const ExtReal& b, const EvalOptions& opt = {});
Rounded rounded_op(const RoundingModel& m, Op op, double a, double b, prec_t prec, const EvalOptions& opt = {},
                   std::size_t site = EvalError::kNoSite);
// Correctly rounded natural log in the model's format.
Rounded rounded_log(const RoundingModel& m, double a, prec_t prec, std::size_t site = EvalError::kNoSite);

// True when x is representable in the model's format.
bool representable(const RoundingModel& m, double x);

ExtReal rp_distance(const ExtReal& x, const ExtReal& y);
ExtReal eps_value(const RoundingModel& m, prec_t prec);

}  // namespace shel
