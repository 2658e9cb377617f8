#include "msseg/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace msseg {

void EnergyParams::validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
    if (!(dt >= 0.0)) throw std::invalid_argument("dt must be positive (or 0 for automatic)");
}

// --- Gaussian kernel ----------------------------------------------------------

GaussianKernel::GaussianKernel(double sigma) : sigma_(sigma), radius_(0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian sigma must be positive");
    radius_ = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    const std::size_t n = 2 * radius_ + 1;
    values_ = Tensor({n, n});
    const double r = static_cast<double>(radius_);
    const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double dy = static_cast<double>(a) - r, dx = static_cast<double>(b) - r;
            const double v = norm * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            values_[a * n + b] = v;
            total += v;
        }
    }
    for (auto& v : values_.data()) v /= total;
}

Tensor GaussianKernel::apply(const Tensor& x) const { return depthwise_conv2d(x, values_, Padding::SameReplicate); }

GaussianKernel make_gaussian_kernel(double sigma) { return GaussianKernel(sigma); }

// --- LabelField -------------------------------------------------------------

bool LabelField::is_simplex(const Tensor& values, double tol) {
    if (values.rank() != 3) return false;
    const std::size_t N = values.channels(), P = values.plane();
    for (std::size_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double v = values[n * P + p];
            if (!(v >= 0.0 && v <= 1.0)) return false;
            s += v;
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

LabelField::LabelField(Tensor values) : values_(std::move(values)) {
    require_rank(values_, 3, "LabelField");
    if (!is_simplex(values_)) throw std::invalid_argument("LabelField: values are not on the probability simplex");
}

LabelField LabelField::uniform(std::size_t classes, std::size_t h, std::size_t w) {
    return LabelField(Tensor({classes, h, w}, 1.0 / static_cast<double>(classes)), Unchecked{});
}

LabelField LabelField::one_hot(const std::vector<int>& labels, std::size_t classes, std::size_t h, std::size_t w) {
    if (labels.size() != h * w) throw std::invalid_argument("one_hot: label count does not match extent");
    Tensor t({classes, h, w});
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const int n = labels[p];
        if (n < 0 || static_cast<std::size_t>(n) >= classes)
            throw std::invalid_argument("one_hot: class index " + std::to_string(n) + " out of range");
        t[static_cast<std::size_t>(n) * h * w + p] = 1.0;
    }
    return LabelField(std::move(t), Unchecked{});
}

LabelField LabelField::renormalized(const Tensor& values) {
    return LabelField(renormalize_simplex(values));
}

// --- regularity operators ---------------------------------------------------

Tensor ZeroOp::forward(const Tensor& u) const { return Tensor::zeros(u.shape()); }
Tensor ZeroOp::adjoint(const Tensor& y) const { return Tensor::zeros(y.shape()); }

GradOp::GradOp(double spacing) : spacing_(spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("GradOp spacing must be positive");
}

Tensor GradOp::forward(const Tensor& u) const {
    require_rank(u, 3, "GradOp::forward");
    const std::size_t C = u.channels(), H = u.height(), W = u.width();
    const double inv = 1.0 / spacing_;
    Tensor out({2 * C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                const double here = u.at(c, i, j);
                out.at(c, i, j) = j + 1 < W ? (u.at(c, i, j + 1) - here) * inv : 0.0;
                out.at(C + c, i, j) = i + 1 < H ? (u.at(c, i + 1, j) - here) * inv : 0.0;
            }
        }
    }
    return out;
}

Tensor GradOp::adjoint(const Tensor& y) const {
    require_rank(y, 3, "GradOp::adjoint");
    if (y.channels() % 2 != 0) throw std::invalid_argument("GradOp::adjoint expects 2C channels");
    const std::size_t C = y.channels() / 2, H = y.height(), W = y.width();
    const double inv = 1.0 / spacing_;
    Tensor out({C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                double acc = 0.0;
                if (j + 1 < W) acc -= y.at(c, i, j);
                if (j >= 1) acc += y.at(c, i, j - 1);
                if (i + 1 < H) acc -= y.at(C + c, i, j);
                if (i >= 1) acc += y.at(C + c, i - 1, j);
                out.at(c, i, j) = acc * inv;
            }
        }
    }
    return out;
}

LearnedOp::LearnedOp(ConvKernel first, ConvKernel second) : first_(std::move(first)), second_(std::move(second)) {
    if (second_.in_channels() != first_.out_channels())
        throw std::invalid_argument("LearnedOp: second conv must consume the first conv's channels");
    if (second_.out_channels() % first_.in_channels() != 0)
        throw std::invalid_argument("LearnedOp: output channels must be a multiple of input channels");
}

Tensor LearnedOp::forward(const Tensor& u) const {
    return conv2d(relu(conv2d(u, first_, 1, Padding::SameZero)), second_, 1, Padding::SameZero);
}

Tensor LearnedOp::adjoint(const Tensor& y) const {
    const ConvKernel w2(second_.weights), w1(first_.weights);
    return transpose_conv2d(relu(transpose_conv2d(y, w2, 1, Padding::SameZero)), w1, 1, Padding::SameZero);
}

std::size_t LearnedOp::groups() const { return second_.out_channels() / first_.in_channels(); }

Tensor broadcast_groups(const Tensor& v, std::size_t groups) {
    require_rank(v, 3, "broadcast_groups");
    if (groups == 1) return v;
    const std::size_t n = v.size();
    Tensor out({groups * v.channels(), v.height(), v.width()});
    for (std::size_t g = 0; g < groups; ++g) std::copy(v.raw(), v.raw() + n, out.raw() + g * n);
    return out;
}

Tensor group_square_norm(const Tensor& y, std::size_t groups) {
    require_rank(y, 3, "group_square_norm");
    if (groups == 0 || y.channels() % groups != 0)
        throw std::invalid_argument("group_square_norm: channels not divisible by groups");
    const std::size_t n = y.size() / groups;
    Tensor out({y.channels() / groups, y.height(), y.width()});
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t k = 0; k < n; ++k) out[k] += y[g * n + k] * y[g * n + k];
    return out;
}

// --- energy terms -------------------------------------------------------------

double td_regularizer(const LabelField& v, const GaussianKernel& k, const Tensor& edge, double alpha) {
    const Tensor& vv = v.values();
    require_rank(edge, 3, "td_regularizer edge weight");
    if (edge.channels() != 1 || edge.height() != v.height() || edge.width() != v.width())
        throw std::invalid_argument("td_regularizer: edge weight must be 1 x H x W matching v");
    Tensor one_minus(vv.shape());
    for (std::size_t i = 0; i < vv.size(); ++i) one_minus[i] = 1.0 - vv[i];
    const Tensor smoothed = k.apply(one_minus);
    const std::size_t P = vv.plane();
    double acc = 0.0;
    for (std::size_t n = 0; n < vv.channels(); ++n)
        for (std::size_t p = 0; p < P; ++p) acc += edge[p] * vv[n * P + p] * smoothed[n * P + p];
    return alpha * acc;
}

Tensor subgradient_p(const LabelField& v_anchor, const GaussianKernel& k, double alpha) {
    const Tensor& va = v_anchor.values();
    Tensor t(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) t[i] = 1.0 - 2.0 * va[i];
    return scale(k.apply(t), alpha);
}

double entropy_term(const LabelField& v, double epsilon) {
    double acc = 0.0;
    for (double x : v.values().data()) acc += x * std::log(std::max(x, kEntropyClamp));
    return epsilon * acc;
}

Tensor edge_weight(const Tensor& f, double gamma) {
    require_rank(f, 3, "edge_weight");
    if (f.channels() != 1) throw std::invalid_argument("edge_weight expects a single-channel image");
    if (!(gamma >= 0.0)) throw std::invalid_argument("edge_weight: gamma must be nonnegative");
    const Tensor g = GradOp().forward(f);
    const std::size_t P = f.plane();
    Tensor e(f.shape());
    for (std::size_t p = 0; p < P; ++p) e[p] = 1.0 / (1.0 + gamma * std::hypot(g[p], g[P + p]));
    return e;
}

EnergyTerms energy_terms(const Tensor& u, const LabelField& v, const Tensor& f_hat, const LabelField& v_anchor,
                         const RegularityOperator& op, const EnergyParams& params, const GaussianKernel& k) {
    require_same_shape(u, f_hat, "total_energy u/f_hat");
    require_same_shape(v.values(), v_anchor.values(), "total_energy v/v_anchor");
    const std::size_t N = v.classes();
    if (u.channels() % N != 0 || u.height() != v.height() || u.width() != v.width())
        throw std::invalid_argument("total_energy: feature field " + shape_string(u.shape()) +
                                    " incompatible with label field " + shape_string(v.values().shape()));
    const std::size_t I = u.channels() / N;
    const Tensor V = expand_labels(v.values(), I);

    EnergyTerms t;
    double fid = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = f_hat[i] - u[i];
        fid += d * d * V[i];
    }
    t.fidelity = 0.5 * fid;

    const Tensor Lu = op.forward(u);
    t.smoothness = 0.5 * params.lambda * inner_product(V, group_square_norm(Lu, op.groups()));

    const Tensor& vv = v.values();
    const Tensor& va = v_anchor.values();
    const Tensor p = subgradient_p(v_anchor, k, params.alpha);
    double lin = 0.0;
    for (std::size_t i = 0; i < vv.size(); ++i) lin += p[i] * (vv[i] - va[i]);
    t.linearized = lin;
    t.entropy = entropy_term(v, params.epsilon);
    t.anchor = td_regularizer(v_anchor, k, Tensor::ones({1, v.height(), v.width()}), params.alpha);
    return t;
}

double total_energy(const Tensor& u, const LabelField& v, const Tensor& f_hat, const LabelField& v_anchor,
                    const RegularityOperator& op, const EnergyParams& params) {
    return energy_terms(u, v, f_hat, v_anchor, op, params, GaussianKernel(params.sigma)).total();
}

}  // namespace msseg
