#include "boxkg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "boxkg/errors.hpp"
#include "boxkg/numeric.hpp"

namespace boxkg::autodiff {

namespace {

bool all_zero(std::span<const double> g) {
    for (double x : g) {
        if (x != 0.0) return false;
    }
    return true;
}

}  // namespace

NodeId Tape::push(Op op, std::size_t len, NodeId a, NodeId b, double c) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.off = static_cast<std::uint32_t>(values_.size());
    n.len = static_cast<std::uint32_t>(len);
    n.c = c;
    values_.resize(values_.size() + len, 0.0);
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
}

std::span<double> Tape::val(NodeId id) {
    Node& n = nodes_[id];
    return {values_.data() + n.off, n.len};
}

std::span<const double> Tape::val(NodeId id) const {
    const Node& n = nodes_[id];
    return {values_.data() + n.off, n.len};
}

std::span<double> Tape::grd(NodeId id) {
    Node& n = nodes_[id];
    return {grads_.data() + n.off, n.len};
}

void Tape::require_same_shape(NodeId a, NodeId b, const char* op) const {
    if (nodes_[a].len != nodes_[b].len) {
        throw config_error(std::string(op) + ": shape mismatch (" +
                           std::to_string(nodes_[a].len) + " vs " +
                           std::to_string(nodes_[b].len) + ")");
    }
}

NodeId Tape::constant(double v) {
    NodeId id = push(Op::Const, 1, -1, -1, 0.0);
    val(id)[0] = v;
    return id;
}

NodeId Tape::constant(std::span<const double> v) {
    NodeId id = push(Op::Const, v.size(), -1, -1, 0.0);
    std::copy(v.begin(), v.end(), val(id).begin());
    return id;
}

NodeId Tape::param(std::span<const double> value, double* grad_slot) {
    NodeId id = push(Op::Param, value.size(), -1, -1, 0.0);
    std::copy(value.begin(), value.end(), val(id).begin());
    nodes_[id].grad_slot = grad_slot;
    return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape(a, b, "add");
    NodeId id = push(Op::Add, nodes_[a].len, a, b, 0.0);
    auto out = val(id);
    auto va = val(a), vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    require_same_shape(a, b, "sub");
    NodeId id = push(Op::Sub, nodes_[a].len, a, b, 0.0);
    auto out = val(id);
    auto va = val(a), vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    require_same_shape(a, b, "mul");
    NodeId id = push(Op::Mul, nodes_[a].len, a, b, 0.0);
    auto out = val(id);
    auto va = val(a), vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    return id;
}

NodeId Tape::div(NodeId a, NodeId b) {
    require_same_shape(a, b, "div");
    for (double x : val(b)) {
        if (std::abs(x) < 1e-300) {
            throw numeric_error("div: denominator magnitude below 1e-300");
        }
    }
    NodeId id = push(Op::Div, nodes_[a].len, a, b, 0.0);
    auto out = val(id);
    auto va = val(a), vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] / vb[i];
    return id;
}

NodeId Tape::neg(NodeId a) {
    NodeId id = push(Op::Neg, nodes_[a].len, a, -1, 0.0);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -va[i];
    return id;
}

NodeId Tape::scale(NodeId a, double c) {
    NodeId id = push(Op::Scale, nodes_[a].len, a, -1, c);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * va[i];
    return id;
}

NodeId Tape::add_const(NodeId a, double c) {
    NodeId id = push(Op::AddConst, nodes_[a].len, a, -1, c);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + c;
    return id;
}

NodeId Tape::exp(NodeId a) {
    NodeId id = push(Op::Exp, nodes_[a].len, a, -1, 0.0);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(va[i]);
    return id;
}

NodeId Tape::log(NodeId a) {
    for (double x : val(a)) {
        if (!(x > 0.0)) {
            throw numeric_error("log: argument must be positive, got " + std::to_string(x));
        }
    }
    NodeId id = push(Op::Log, nodes_[a].len, a, -1, 0.0);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(va[i]);
    return id;
}

NodeId Tape::softplus(NodeId a, double beta) {
    if (!(beta > 0.0)) throw config_error("softplus: beta must be positive");
    NodeId id = push(Op::Softplus, nodes_[a].len, a, -1, beta);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = numeric::softplus(va[i], beta);
    return id;
}

NodeId Tape::log_softplus(NodeId a, double beta) {
    if (!(beta > 0.0)) throw config_error("log_softplus: beta must be positive");
    NodeId id = push(Op::LogSoftplus, nodes_[a].len, a, -1, beta);
    auto out = val(id);
    auto va = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = numeric::log_softplus(va[i], beta);
    return id;
}

NodeId Tape::logsumexp_pair(NodeId a, NodeId b, double beta) {
    require_same_shape(a, b, "logsumexp_pair");
    if (!(beta > 0.0)) throw config_error("logsumexp_pair: beta must be positive");
    NodeId id = push(Op::LogSumExpPair, nodes_[a].len, a, b, beta);
    auto out = val(id);
    auto va = val(a), vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = numeric::logsumexp2(va[i], vb[i], beta);
    }
    return id;
}

NodeId Tape::sum(NodeId a) {
    NodeId id = push(Op::Sum, 1, a, -1, 0.0);
    double acc = 0.0;
    for (double x : val(a)) acc += x;
    val(id)[0] = acc;
    return id;
}

NodeId Tape::product(NodeId a) {
    NodeId id = push(Op::Product, 1, a, -1, 0.0);
    double acc = 1.0;
    for (double x : val(a)) acc *= x;
    val(id)[0] = acc;
    return id;
}

NodeId Tape::sum_squares(NodeId a) {
    NodeId id = push(Op::SumSquares, 1, a, -1, 0.0);
    double acc = 0.0;
    for (double x : val(a)) acc += x * x;
    val(id)[0] = acc;
    return id;
}

NodeId Tape::logsumexp(NodeId a, double beta) {
    if (nodes_[a].len == 0) throw config_error("logsumexp: empty vector");
    if (!(beta > 0.0)) throw config_error("logsumexp: beta must be positive");
    NodeId id = push(Op::LogSumExp, 1, a, -1, beta);
    auto va = val(a);
    const double hi = *std::max_element(va.begin(), va.end());
    double acc = 0.0;
    for (double x : va) acc += std::exp((x - hi) / beta);
    val(id)[0] = hi + beta * std::log(acc);
    return id;
}

double Tape::value(NodeId id) const {
    if (nodes_[id].len != 1) throw config_error("value: node is not scalar");
    return val(id)[0];
}

std::span<const double> Tape::values(NodeId id) const { return val(id); }

std::span<const double> Tape::gradient(NodeId id) const {
    const Node& n = nodes_[id];
    return {grads_.data() + n.off, n.len};
}

void Tape::backward(NodeId root) {
    if (nodes_[root].len != 1) {
        throw config_error("backward: root must be scalar");
    }
    grads_.assign(values_.size(), 0.0);
    grads_[nodes_[root].off] = 1.0;

    for (NodeId i = static_cast<NodeId>(nodes_.size()) - 1; i >= 0; --i) {
        const Node& n = nodes_[i];
        auto g = std::span<double>{grads_.data() + n.off, n.len};
        // Nodes with no incoming gradient are dead ends (or downstream of the
        // root); skipping them also keeps NaN-prone local derivatives inert.
        if (all_zero(g)) continue;

        switch (n.op) {
            case Op::Const:
            case Op::Param:
                break;
            case Op::Add: {
                auto ga = grd(n.a), gb = grd(n.b);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k];
                    gb[k] += g[k];
                }
                break;
            }
            case Op::Sub: {
                auto ga = grd(n.a), gb = grd(n.b);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k];
                    gb[k] -= g[k];
                }
                break;
            }
            case Op::Mul: {
                auto ga = grd(n.a), gb = grd(n.b);
                auto va = val(n.a), vb = val(n.b);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k] * vb[k];
                    gb[k] += g[k] * va[k];
                }
                break;
            }
            case Op::Div: {
                auto ga = grd(n.a), gb = grd(n.b);
                auto vb = val(n.b), vo = val(i);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k] / vb[k];
                    gb[k] -= g[k] * vo[k] / vb[k];
                }
                break;
            }
            case Op::Neg: {
                auto ga = grd(n.a);
                for (std::size_t k = 0; k < n.len; ++k) ga[k] -= g[k];
                break;
            }
            case Op::Scale: {
                auto ga = grd(n.a);
                for (std::size_t k = 0; k < n.len; ++k) ga[k] += n.c * g[k];
                break;
            }
            case Op::AddConst: {
                auto ga = grd(n.a);
                for (std::size_t k = 0; k < n.len; ++k) ga[k] += g[k];
                break;
            }
            case Op::Exp: {
                auto ga = grd(n.a);
                auto vo = val(i);
                for (std::size_t k = 0; k < n.len; ++k) ga[k] += g[k] * vo[k];
                break;
            }
            case Op::Log: {
                auto ga = grd(n.a);
                auto va = val(n.a);
                for (std::size_t k = 0; k < n.len; ++k) ga[k] += g[k] / va[k];
                break;
            }
            case Op::Softplus: {
                auto ga = grd(n.a);
                auto va = val(n.a);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k] * numeric::sigmoid(va[k] / n.c);
                }
                break;
            }
            case Op::LogSoftplus: {
                auto ga = grd(n.a);
                auto va = val(n.a);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k] * numeric::log_softplus_grad(va[k], n.c);
                }
                break;
            }
            case Op::LogSumExpPair: {
                auto ga = grd(n.a), gb = grd(n.b);
                auto va = val(n.a), vb = val(n.b), vo = val(i);
                for (std::size_t k = 0; k < n.len; ++k) {
                    ga[k] += g[k] * std::exp((va[k] - vo[k]) / n.c);
                    gb[k] += g[k] * std::exp((vb[k] - vo[k]) / n.c);
                }
                break;
            }
            case Op::Sum: {
                auto ga = grd(n.a);
                for (std::size_t k = 0; k < nodes_[n.a].len; ++k) ga[k] += g[0];
                break;
            }
            case Op::Product: {
                // prefix/suffix products so zeros in the operand stay exact
                auto ga = grd(n.a);
                auto va = val(n.a);
                const std::size_t m = nodes_[n.a].len;
                scratch_.assign(m + 1, 1.0);
                for (std::size_t k = m; k-- > 0;) {
                    scratch_[k] = scratch_[k + 1] * va[k];  // suffix products
                }
                double prefix = 1.0;
                for (std::size_t k = 0; k < m; ++k) {
                    ga[k] += g[0] * prefix * scratch_[k + 1];
                    prefix *= va[k];
                }
                break;
            }
            case Op::SumSquares: {
                auto ga = grd(n.a);
                auto va = val(n.a);
                for (std::size_t k = 0; k < nodes_[n.a].len; ++k) {
                    ga[k] += 2.0 * g[0] * va[k];
                }
                break;
            }
            case Op::LogSumExp: {
                auto ga = grd(n.a);
                auto va = val(n.a);
                const double vo = val(i)[0];
                for (std::size_t k = 0; k < nodes_[n.a].len; ++k) {
                    ga[k] += g[0] * std::exp((va[k] - vo) / n.c);
                }
                break;
            }
        }
    }

    // Flush leaf gradients into their bound slots.
    for (const Node& n : nodes_) {
        if (n.op == Op::Param && n.grad_slot != nullptr) {
            const double* g = grads_.data() + n.off;
            for (std::uint32_t k = 0; k < n.len; ++k) n.grad_slot[k] += g[k];
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
}

}  // namespace boxkg::autodiff
