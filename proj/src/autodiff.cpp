#include "msseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msseg::ad {

NodeId Tape::push(Node node) {
    std::vector<const Tensor*> in;
    in.reserve(node.inputs.size());
    for (NodeId id : node.inputs) {
        if (id >= nodes_.size()) throw std::out_of_range("tape input " + std::to_string(id) + " does not exist");
        in.push_back(&nodes_[id].value);
        node.needs_grad = node.needs_grad || nodes_[id].needs_grad;
    }
    node.value = evaluate(node, in);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

namespace {

Node make(Op op, std::vector<NodeId> inputs) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    return n;
}

}  // namespace

NodeId Tape::conv2d(NodeId x, NodeId w, std::optional<NodeId> b, std::size_t stride, Padding padding) {
    Node n = make(Op::Conv2d, {x, w});
    if (b) n.inputs.push_back(*b);
    n.stride = stride;
    n.padding = padding;
    return push(std::move(n));
}

NodeId Tape::transpose_conv2d(NodeId y, NodeId w, std::size_t out_h, std::size_t out_w, std::size_t stride,
                              Padding padding) {
    Node n = make(Op::TransposeConv2d, {y, w});
    n.stride = stride;
    n.padding = padding;
    n.h = out_h;
    n.w = out_w;
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) { return push(make(Op::Relu, {x})); }
NodeId Tape::add(NodeId a, NodeId b) { return push(make(Op::Add, {a, b})); }
NodeId Tape::sub(NodeId a, NodeId b) { return push(make(Op::Sub, {a, b})); }
NodeId Tape::mul(NodeId a, NodeId b) { return push(make(Op::Mul, {a, b})); }
NodeId Tape::square(NodeId x) { return push(make(Op::Square, {x})); }
NodeId Tape::scale_by(NodeId x, NodeId s) { return push(make(Op::ScaleBy, {x, s})); }
NodeId Tape::exp(NodeId x) { return push(make(Op::Exp, {x})); }
NodeId Tape::softmax(NodeId x) { return push(make(Op::Softmax, {x})); }
NodeId Tape::average_pool(NodeId x) { return push(make(Op::AveragePool, {x})); }
NodeId Tape::renormalize(NodeId x) { return push(make(Op::Renormalize, {x})); }

NodeId Tape::scale(NodeId x, double c) {
    Node n = make(Op::Scale, {x});
    n.c0 = c;
    return push(std::move(n));
}

NodeId Tape::affine(NodeId x, double offset, double factor) {
    Node n = make(Op::Affine, {x});
    n.c0 = offset;
    n.c1 = factor;
    return push(std::move(n));
}

NodeId Tape::replicate_classes(NodeId x, std::size_t classes) {
    Node n = make(Op::ReplicateClasses, {x});
    n.count = classes;
    return push(std::move(n));
}

NodeId Tape::expand_labels(NodeId v, std::size_t features) {
    Node n = make(Op::ExpandLabels, {v});
    n.count = features;
    return push(std::move(n));
}

NodeId Tape::reduce_groups(NodeId x, std::size_t classes) {
    Node n = make(Op::ReduceGroups, {x});
    n.count = classes;
    return push(std::move(n));
}

NodeId Tape::prolong(NodeId x, std::size_t h, std::size_t w) {
    Node n = make(Op::Prolong, {x});
    n.h = h;
    n.w = w;
    return push(std::move(n));
}

Tensor Tape::evaluate(const Node& n, const std::vector<const Tensor*>& in) const {
    switch (n.op) {
    case Op::Leaf:
        return n.value;
    case Op::Conv2d:
        return kernels::parallel::conv2d(*in[0], *in[1], in.size() > 2 ? in[2] : nullptr, n.stride, n.padding);
    case Op::TransposeConv2d:
        return kernels::parallel::transpose_conv2d(*in[0], *in[1], n.stride, n.padding, n.h, n.w);
    case Op::Relu:
        return msseg::relu(*in[0]);
    case Op::Add:
        return pointwise_add(*in[0], *in[1]);
    case Op::Sub:
        return pointwise_sub(*in[0], *in[1]);
    case Op::Mul:
        return pointwise_mul(*in[0], *in[1]);
    case Op::Square:
        return msseg::square(*in[0]);
    case Op::Scale:
        return msseg::scale(*in[0], n.c0);
    case Op::ScaleBy:
        if (in[1]->size() != 1) throw std::invalid_argument("scale_by needs a one-element factor");
        return msseg::scale(*in[0], (*in[1])[0]);
    case Op::Exp: {
        Tensor out = *in[0];
        for (auto& e : out.data()) e = std::exp(e);
        return out;
    }
    case Op::Affine: {
        Tensor out = *in[0];
        for (auto& e : out.data()) e = n.c0 + n.c1 * e;
        return out;
    }
    case Op::ReplicateClasses:
        return msseg::replicate_classes(*in[0], n.count);
    case Op::ExpandLabels:
        return msseg::expand_labels(*in[0], n.count);
    case Op::ReduceGroups:
        return msseg::reduce_groups(*in[0], n.count);
    case Op::Softmax:
        return channel_softmax(*in[0]);
    case Op::AveragePool:
        return average_pool2x(*in[0]);
    case Op::Renormalize:
        return renormalize_simplex(*in[0]);
    case Op::Prolong:
        return fit_extent(upsample_bilinear2x(*in[0]), n.h, n.w);
    }
    throw std::logic_error("unknown tape op");
}

namespace {

void accumulate(std::vector<std::optional<Tensor>>& grads, NodeId id, Tensor g) {
    if (grads[id]) {
        grads[id] = pointwise_add(*grads[id], g);
    } else {
        grads[id] = std::move(g);
    }
}

}  // namespace

std::vector<std::optional<Tensor>> Tape::backward(NodeId output, const Tensor& seed) const {
    if (output >= nodes_.size()) throw std::out_of_range("backward: unknown output node");
    require_same_shape(seed, nodes_[output].value, "backward seed");
    std::vector<std::optional<Tensor>> grads(nodes_.size());
    grads[output] = seed;

    for (std::size_t idx = output + 1; idx-- > 0;) {
        if (!grads[idx]) continue;
        const Node& n = nodes_[idx];
        if (n.op == Op::Leaf || !n.needs_grad) continue;
        const Tensor& g = *grads[idx];
        auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].needs_grad; };
        auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
        auto give = [&](std::size_t k, Tensor t) { accumulate(grads, n.inputs[k], std::move(t)); };

        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Conv2d: {
            const Tensor& x = in(0);
            const Tensor& w = in(1);
            if (wants(0))
                give(0, kernels::parallel::transpose_conv2d(g, w, n.stride, n.padding, x.height(), x.width()));
            if (wants(1))
                give(1, kernels::parallel::conv2d_weight_grad(x, g, w.dim(2), w.dim(3), n.stride, n.padding));
            if (n.inputs.size() > 2 && wants(2)) give(2, channel_sums(g));
            break;
        }
        case Op::TransposeConv2d: {
            const Tensor& w = in(1);
            if (wants(0)) give(0, kernels::parallel::conv2d(g, w, nullptr, n.stride, n.padding));
            if (wants(1))
                give(1, kernels::parallel::conv2d_weight_grad(g, in(0), w.dim(2), w.dim(3), n.stride, n.padding));
            break;
        }
        case Op::Relu: {
            Tensor t = g;
            const Tensor& x = in(0);
            for (std::size_t i = 0; i < t.size(); ++i)
                if (!(x[i] > 0.0)) t[i] = 0.0;
            give(0, std::move(t));
            break;
        }
        case Op::Add:
            if (wants(0)) give(0, g);
            if (wants(1)) give(1, g);
            break;
        case Op::Sub:
            if (wants(0)) give(0, g);
            if (wants(1)) give(1, msseg::scale(g, -1.0));
            break;
        case Op::Mul:
            if (wants(0)) give(0, pointwise_mul(g, in(1)));
            if (wants(1)) give(1, pointwise_mul(g, in(0)));
            break;
        case Op::Square:
            give(0, pointwise_mul(msseg::scale(g, 2.0), in(0)));
            break;
        case Op::Scale:
            give(0, msseg::scale(g, n.c0));
            break;
        case Op::ScaleBy:
            if (wants(0)) give(0, msseg::scale(g, in(1)[0]));
            if (wants(1)) give(1, Tensor(in(1).shape(), inner_product(g, in(0))));
            break;
        case Op::Exp:
            give(0, pointwise_mul(g, n.value));
            break;
        case Op::Affine:
            give(0, msseg::scale(g, n.c1));
            break;
        case Op::ReplicateClasses:
            give(0, sum_class_copies(g, n.count));
            break;
        case Op::ExpandLabels:
            give(0, msseg::reduce_groups(g, in(0).channels()));
            break;
        case Op::ReduceGroups:
            give(0, msseg::expand_labels(g, in(0).channels() / n.count));
            break;
        case Op::Softmax: {
            const Tensor& y = n.value;
            const std::size_t N = y.channels(), P = y.plane();
            Tensor t(y.shape());
            for (std::size_t p = 0; p < P; ++p) {
                double dot = 0.0;
                for (std::size_t c = 0; c < N; ++c) dot += y[c * P + p] * g[c * P + p];
                for (std::size_t c = 0; c < N; ++c) t[c * P + p] = y[c * P + p] * (g[c * P + p] - dot);
            }
            give(0, std::move(t));
            break;
        }
        case Op::AveragePool:
            give(0, average_pool2x_adjoint(g, in(0).height(), in(0).width()));
            break;
        case Op::Renormalize: {
            // y = c / s with c = clamp(x, 0, 1), s = sum of c over channels.
            const Tensor& x = in(0);
            const Tensor& y = n.value;
            const std::size_t N = y.channels(), P = y.plane();
            Tensor t(y.shape());
            for (std::size_t p = 0; p < P; ++p) {
                double s = 0.0, gy = 0.0;
                for (std::size_t c = 0; c < N; ++c) {
                    s += std::clamp(x[c * P + p], 0.0, 1.0);
                    gy += g[c * P + p] * y[c * P + p];
                }
                if (s <= 0.0) continue;  // uniform fallback is locally constant
                for (std::size_t c = 0; c < N; ++c) {
                    const double xv = x[c * P + p];
                    t[c * P + p] = (xv >= 0.0 && xv <= 1.0) ? (g[c * P + p] - gy) / s : 0.0;
                }
            }
            give(0, std::move(t));
            break;
        }
        case Op::Prolong: {
            const Tensor& x = in(0);
            const Tensor up = fit_extent_adjoint(g, 2 * x.height(), 2 * x.width());
            give(0, upsample_bilinear2x_adjoint(up, x.height(), x.width()));
            break;
        }
        }
    }
    return grads;
}

std::vector<Tensor> Tape::replay() const {
    std::vector<Tensor> values;
    values.reserve(nodes_.size());
    for (const Node& n : nodes_) {
        if (n.op == Op::Leaf) {
            values.push_back(n.value);
            continue;
        }
        std::vector<const Tensor*> in;
        for (NodeId id : n.inputs) in.push_back(&values[id]);
        values.push_back(evaluate(n, in));
    }
    return values;
}

}  // namespace msseg::ad
