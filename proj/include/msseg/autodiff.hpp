#pragma once

// A small tape-based reverse-mode differentiator covering exactly the
// operations the network uses. Nodes are appended in evaluation order, so
// the node list is already a topological order.

#include <cstddef>
#include <optional>
#include <vector>

#include "msseg/ops.hpp"

namespace msseg::ad {

using NodeId = std::size_t;

enum class Op {
    Leaf,
    Conv2d,           ///< inputs x, w[, b]
    TransposeConv2d,  ///< inputs y, w
    Relu,
    Add,
    Sub,
    Mul,
    Square,
    Scale,        ///< constant factor c0
    ScaleBy,      ///< inputs x, s (one-element tensor)
    Exp,          ///< elementwise
    Affine,       ///< c0 + c1 * x
    ReplicateClasses,
    ExpandLabels,
    ReduceGroups,
    Softmax,
    AveragePool,
    Renormalize,
    Prolong,      ///< bilinear 2x then fit to (h, w)
};

struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> inputs;
    Tensor value;
    bool needs_grad = false;
    std::size_t stride = 1;
    Padding padding = Padding::SameZero;
    std::size_t count = 0;        ///< classes or features for layout ops
    std::size_t h = 0, w = 0;     ///< target extent (transpose conv, prolong)
    double c0 = 0.0, c1 = 0.0;
};

class Tape {
public:
    NodeId leaf(Tensor value, bool requires_grad = false);

    NodeId conv2d(NodeId x, NodeId w, std::optional<NodeId> b, std::size_t stride = 1,
                  Padding padding = Padding::SameZero);
    NodeId transpose_conv2d(NodeId y, NodeId w, std::size_t out_h, std::size_t out_w, std::size_t stride = 1,
                            Padding padding = Padding::SameZero);
    NodeId relu(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId square(NodeId x);
    NodeId scale(NodeId x, double c);
    NodeId scale_by(NodeId x, NodeId s);
    NodeId exp(NodeId x);
    NodeId affine(NodeId x, double offset, double factor);
    NodeId replicate_classes(NodeId x, std::size_t classes);
    NodeId expand_labels(NodeId v, std::size_t features);
    NodeId reduce_groups(NodeId x, std::size_t classes);
    NodeId softmax(NodeId x);
    NodeId average_pool(NodeId x);
    NodeId renormalize(NodeId x);
    NodeId prolong(NodeId x, std::size_t h, std::size_t w);

    const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    std::size_t size() const { return nodes_.size(); }

    /// Gradients of <seed, value(output)> with respect to every node; entries
    /// are empty for nodes the output does not depend on through a
    /// gradient-carrying path.
    std::vector<std::optional<Tensor>> backward(NodeId output, const Tensor& seed) const;

    /// Re-evaluates every non-leaf node from the stored leaves and returns
    /// the recomputed values.
    std::vector<Tensor> replay() const;

private:
    NodeId push(Node node);
    Tensor evaluate(const Node& node, const std::vector<const Tensor*>& in) const;

    std::vector<Node> nodes_;
};

}  // namespace msseg::ad
