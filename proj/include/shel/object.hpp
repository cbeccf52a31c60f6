#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "shel/bound.hpp"
#include "shel/ext_real.hpp"

namespace shel {

using IntMatrix = std::vector<std::vector<long>>;  // rows x cols
using Shift = std::vector<ExtReal>;

// Shape of a Shel object over the reals with shift group R^k acting by
// x * e^s. A Base has one shift dimension shared by all its values. A Star
// carries an integer homomorphism from root shift dimensions to dependent
// shift dimensions (dep_dims x root_dims); an all-zero homomorphism is
// normalized to a Tensor.
class ShelObject {
public:
    enum class Kind { Unit, Base, Tensor, Star };

    struct Leaf {
        std::size_t value_offset;
        std::size_t arity;
        std::size_t dim;
        Bound bound;
    };

    ShelObject();  // unit
    static ShelObject unit() { return ShelObject(); }
    static ShelObject base(std::size_t arity, Bound p);
    static ShelObject tensor(const ShelObject& l, const ShelObject& r);
    // Right-nested tensor; empty list gives the unit.
    static ShelObject tensor(const std::vector<ShelObject>& parts);
    // Uniform scale; root must have one shift dimension.
    static ShelObject star(const ShelObject& root, const ShelObject& dep, long n);
    static ShelObject star(const ShelObject& root, const ShelObject& dep, const IntMatrix& hom);

    Kind kind() const { return n_->kind; }
    std::size_t arity() const { return n_->arity; }
    std::size_t dims() const { return n_->dims; }
    const Bound& bound() const;  // Base only
    const ShelObject& left() const;   // Tensor: left, Star: root
    const ShelObject& right() const;  // Tensor: right, Star: dependent
    const IntMatrix& hom() const;     // Star only

    const std::vector<Bound>& bounds() const { return n_->bounds; }
    // Row i gives the exponent coefficients of value i over the shift dims.
    const IntMatrix& action() const { return n_->action; }
    const std::vector<Leaf>& leaves() const { return n_->leaves; }

    ShelObject with_bounds(const std::vector<Bound>& b) const;
    bool same_shape(const ShelObject& o) const;
    friend bool operator==(const ShelObject& a, const ShelObject& b);
    friend bool operator!=(const ShelObject& a, const ShelObject& b) { return !(a == b); }

    std::string str() const;

private:
    struct Node {
        Kind kind = Kind::Unit;
        std::size_t arity = 0;
        std::size_t dims = 0;
        Bound bound;
        std::vector<ShelObject> kids;
        IntMatrix hom;
        std::vector<Bound> bounds;
        IntMatrix action;
        std::vector<Leaf> leaves;
    };
    std::shared_ptr<const Node> n_;
    static ShelObject finish(std::shared_ptr<Node> n);
};

// x_i * exp(sum_j action[i][j] * s_j)
std::vector<ExtReal> act(const ShelObject& obj, const std::vector<ExtReal>& x, const Shift& s);
Shift zero_shift(const ShelObject& obj, prec_t prec);

}  // namespace shel
