#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace boxkg::autodiff {

// Index of a node on its tape.
using NodeId = std::int32_t;

// Reverse-mode tape over scalars and fixed-length dense vectors.
//
// Values and gradients live in flat arenas so a cleared tape reuses its
// capacity across training steps. One tape is owned by one thread; parameter
// leaves are bound to external gradient slots and flushed by backward().
class Tape {
public:
    // -- leaves ------------------------------------------------------------
    NodeId constant(double v);
    NodeId constant(std::span<const double> v);
    // Leaf whose gradient is accumulated into grad_slot (same length as value).
    NodeId param(std::span<const double> value, double* grad_slot);

    // -- elementwise arithmetic (operands must have identical shape) --------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId neg(NodeId a);
    NodeId scale(NodeId a, double c);      // c * a
    NodeId add_const(NodeId a, double c);  // a + c

    // -- elementwise transcendentals ----------------------------------------
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    // beta * log(1 + exp(x/beta)), stable branches; derivative sigmoid(x/beta).
    NodeId softplus(NodeId a, double beta);
    // log of the above without forming the underflow-prone value.
    NodeId log_softplus(NodeId a, double beta);
    // Elementwise beta * log(exp(a/beta) + exp(b/beta)); symmetric bit-for-bit.
    NodeId logsumexp_pair(NodeId a, NodeId b, double beta);

    // -- reductions (vector -> scalar) ---------------------------------------
    NodeId sum(NodeId a);
    NodeId product(NodeId a);
    NodeId sum_squares(NodeId a);  // sum_i v_i^2
    // beta * log(sum_i exp(v_i/beta)) with max subtraction; grad is the softmax.
    NodeId logsumexp(NodeId a, double beta);

    // -- access --------------------------------------------------------------
    std::size_t size(NodeId id) const { return nodes_[id].len; }
    bool is_scalar(NodeId id) const { return nodes_[id].len == 1; }
    double value(NodeId id) const;  // scalar nodes only
    std::span<const double> values(NodeId id) const;
    std::span<const double> gradient(NodeId id) const;

    // Zeroes all node gradients, seeds the scalar root with 1, sweeps the tape
    // in reverse, then adds each bound leaf's gradient into its slot.
    void backward(NodeId root);

    // Clears all nodes but keeps arena capacity.
    void clear();

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        Const,
        Param,
        Add,
        Sub,
        Mul,
        Div,
        Neg,
        Scale,
        AddConst,
        Exp,
        Log,
        Softplus,
        LogSoftplus,
        LogSumExpPair,
        Sum,
        Product,
        SumSquares,
        LogSumExp,
    };

    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        std::uint32_t off = 0;  // offset into the value/grad arenas
        std::uint32_t len = 0;
        double c = 0.0;  // scale factor, additive constant, or temperature
        double* grad_slot = nullptr;
    };

    NodeId push(Op op, std::size_t len, NodeId a, NodeId b, double c);
    std::span<double> val(NodeId id);
    std::span<double> grd(NodeId id);
    std::span<const double> val(NodeId id) const;
    void require_same_shape(NodeId a, NodeId b, const char* op) const;

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<double> scratch_;  // suffix products for the Product backward
};

}  // namespace boxkg::autodiff
