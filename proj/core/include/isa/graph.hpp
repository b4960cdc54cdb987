#pragma once

#include <map>
#include <string>
#include <vector>

#include "isa/array.hpp"

namespace isa {

using NodeId = int;

/// Map from parameter id to the gradient (or update) of identical shape.
using Gradients = std::map<std::string, Array2>;

/// Named trainable parameters. std::map keeps iteration order stable, which
/// the optimizer and checkpoint format rely on.
using ParamSet = std::map<std::string, Array2>;

/// Reverse-mode tape over a fixed operation set. Forward values are computed
/// eagerly when a node is created; backward() accumulates adjoints in reverse
/// creation order, which is a topological order by construction.
///
/// A Graph instance represents one evaluation: build, read values, call
/// backward once, read gradients, discard.
class Graph {
public:
    NodeId constant(Array2 v);
    NodeId parameter(const std::string& name, const Array2& v);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_row(NodeId a, NodeId row);
    NodeId softmax_over(NodeId a, Axis axis);
    NodeId activation(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId l2_normalize(NodeId a);
    NodeId l1_normalize_rows(NodeId a);
    /// Scalar node. y is a constant one-hot target, not differentiated.
    NodeId cross_entropy(NodeId p, Array2 y);
    /// Scalar node. y entries in {0,1}; mean over all entries.
    NodeId binary_cross_entropy(NodeId p, Array2 y);
    NodeId vcat(NodeId a, NodeId b);
    NodeId im2col3x3(NodeId a, int h, int w);
    /// 1 x cols mean over rows, expressed as a constant-weight matmul.
    NodeId mean_rows(NodeId a);

    const Array2& value(NodeId id) const { return nodes_[id].value; }
    double scalar_value(NodeId id) const;

    /// root must be 1x1. May be called once per graph.
    void backward(NodeId root);

    /// Gradient of the last backward() root with respect to node id.
    /// Zero array if the node does not influence the root.
    Array2 grad(NodeId id) const;

    /// name -> gradient for every registered parameter.
    Gradients parameter_grads() const;

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        constant,
        parameter,
        matmul,
        transpose,
        add,
        scale,
        add_row,
        softmax,
        gelu,
        sigmoid,
        l2norm,
        l1norm,
        cross_entropy,
        bce,
        vcat,
        im2col,
    };

    struct Node {
        Op op;
        Array2 value;
        Array2 grad;
        bool requires_grad = false;
        NodeId a = -1;
        NodeId b = -1;
        double c = 0.0;
        Axis axis = Axis::cols;
        int h = 0, w = 0;
        Array2 aux;  // cross-entropy / bce target
    };

    NodeId push(Node n);
    void ensure_grad(Node& n);
    void backprop_into(NodeId id);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, NodeId>> params_;
    bool ran_backward_ = false;
};

}  // namespace isa
