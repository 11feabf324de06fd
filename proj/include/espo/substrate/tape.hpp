// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "espo/errors.hpp"
#include "espo/substrate/params.hpp"
#include "espo/substrate/tensor.hpp"

namespace espo::nn {

using NodeId = std::uint32_t;

// One reverse-mode differentiation tape. Operations evaluate eagerly and, in
// recording mode, append a backward closure; node ids grow monotonically so a
// single reverse sweep visits every node after its consumers.
//
// Exactly one ParameterSet may be bound per tape; everything else enters as a
// constant and receives no gradient. Evaluation order is fixed, which keeps
// forward values and gradients bit-reproducible.
class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}

    void bind(const ParameterSet& params);

    // Leaf view of a bound parameter array (memoized per name).
    NodeId param(const std::string& name);

    NodeId constant(Tensor v, std::string label = {});
    NodeId scalar(double v) { return constant(Tensor::scalar(v)); }

    // ---- tensor ops -----------------------------------------------------
    NodeId add(NodeId a, NodeId b);              // same shape, or [T,O] + [O]
    NodeId matmul(NodeId a, NodeId b);           // [T,K] @ [K,O]
    NodeId embed_rows(NodeId table, std::vector<int> ids);
    NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
    NodeId attention(NodeId q, NodeId k, NodeId v, int heads);  // bidirectional
    NodeId gelu(NodeId x);
    NodeId log_softmax_rows(NodeId x);
    NodeId sum(NodeId x);                        // -> scalar

    struct GatherTerm {
        std::size_t row;
        std::size_t col;
        double weight;
    };
    // Weighted sum of selected entries -> scalar.
    NodeId gather_weighted(NodeId x, std::vector<GatherTerm> terms);

    // ---- scalar ops ------------------------------------------------------
    NodeId s_add(NodeId a, NodeId b);
    NodeId s_sub(NodeId a, NodeId b);
    NodeId s_mul(NodeId a, NodeId b);
    NodeId s_scale(NodeId a, double c);
    NodeId s_shift(NodeId a, double c);
    NodeId s_exp(NodeId a);
    NodeId s_square(NodeId a);
    // min(a, b); on ties the gradient follows a.
    NodeId s_min(NodeId a, NodeId b);
    // clamp to [lo, hi]; zero gradient strictly outside the band.
    NodeId s_clip(NodeId a, double lo, double hi);
    NodeId s_mean(const std::vector<NodeId>& xs);

    // ---- evaluation ------------------------------------------------------
    const Tensor& values(NodeId id) const { return nodes_[id].values; }
    double value(NodeId id) const { return nodes_[id].values.value(); }

    // Reverse sweep from a finite scalar loss. Throws NumericError naming the
    // earliest non-finite node when the loss is not finite.
    void backward(NodeId loss);

    // Accumulated gradient of a node (zeros if the loss never touched it).
    const Tensor& grad(NodeId id);

    // Gradient set mirroring the bound parameters; arrays the loss never
    // touched come back as exact zeros.
    ParameterSet param_grads() const;

    bool recording() const { return record_; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor values;
        Tensor grad;
        bool requires_grad = false;
        bool grad_ready = false;
        std::string label;
        std::function<void(Tape&, NodeId)> backprop;  // empty for leaves
    };

    NodeId push(Tensor values, bool requires_grad, std::string label,
                std::function<void(Tape&, NodeId)> backprop);
    void ensure_grad(NodeId id);
    void accumulate(NodeId id, const Tensor& g);
    bool needs_grad(NodeId id) const { return record_ && nodes_[id].requires_grad; }
    void check_scalar(NodeId id, const char* op) const;

    std::vector<Node> nodes_;
    const ParameterSet* bound_ = nullptr;
    std::vector<std::pair<std::string, NodeId>> param_leaves_;
    bool record_ = true;
};

}  // namespace espo::nn
