#include "msseg/msnet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "msseg/multigrid.hpp"

namespace msseg {

namespace {

template <class Ref, class Params>
std::vector<Ref> collect(Params& p) {
    std::vector<Ref> out;
    auto kernel = [&](const std::string& name, auto& k, bool active) {
        out.push_back({name + ".weight", &k.weights, active});
        if (k.bias) out.push_back({name + ".bias", &*k.bias, active});
    };
    auto fem = [&](const std::string& name, auto& f, bool active) {
        kernel(name + ".L1", f.L1, active);
        kernel(name + ".L2", f.L2, active);
        kernel(name + ".k", f.k, active);
        out.push_back({name + ".lambda", &f.lambda, active});
        out.push_back({name + ".alpha", &f.alpha, active});
        out.push_back({name + ".log_inv_eps", &f.log_inv_eps, active});
        out.push_back({name + ".dt", &f.dt, active});
    };
    kernel("head", p.head, true);
    const std::size_t H = p.levels.size();
    for (std::size_t h = 0; h < H; ++h) {
        const std::string name = "level" + std::to_string(h + 1);
        const bool coarsest = h + 1 == H;
        fem(name + ".down", p.levels[h].down, true);
        fem(name + ".up", p.levels[h].up, !coarsest);
        kernel(name + ".restriction", p.levels[h].restriction, !coarsest);
    }
    kernel("tail1", p.tail1, true);
    kernel("tail2", p.tail2, true);
    return out;
}

ConvKernel glorot_kernel(std::mt19937_64& rng, std::size_t out, std::size_t in, bool bias) {
    const double fan = static_cast<double>((in + out) * 9);
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan), std::sqrt(6.0 / fan));
    Tensor w({out, in, 3, 3});
    for (auto& e : w.data()) e = dist(rng);
    if (bias) return ConvKernel(std::move(w), Tensor::zeros({out}));
    return ConvKernel(std::move(w));
}

FemParams init_fem(std::mt19937_64& rng, std::size_t C, std::size_t N) {
    FemParams f;
    f.L1 = glorot_kernel(rng, C, C, false);
    f.L2 = glorot_kernel(rng, C, C, false);
    f.k = glorot_kernel(rng, N, N, false);
    f.lambda = Tensor::scalar(0.5);
    f.alpha = Tensor::scalar(0.5);
    f.log_inv_eps = Tensor::scalar(std::log(10.0));
    f.dt = Tensor::scalar(0.1);
    return f;
}

ad::NodeId record_L(ad::Tape& t, ad::NodeId u, const detail::FemNodes& fem) {
    return t.conv2d(t.relu(t.conv2d(u, fem.L1, std::nullopt)), fem.L2, std::nullopt);
}

ad::NodeId record_L_star(ad::Tape& t, ad::NodeId y, const detail::FemNodes& fem) {
    const Tensor& v = t.value(y);
    const std::size_t h = v.height(), w = v.width();
    return t.transpose_conv2d(t.relu(t.transpose_conv2d(y, fem.L2, h, w)), fem.L1, h, w);
}

detail::FemNodes fem_leaves(ad::Tape& t, const FemParams& p, bool grad) {
    return {t.leaf(p.L1.weights, grad), t.leaf(p.L2.weights, grad), t.leaf(p.k.weights, grad),
            t.leaf(p.lambda, grad),     t.leaf(p.alpha, grad),      t.leaf(p.log_inv_eps, grad),
            t.leaf(p.dt, grad)};
}

void check_fem(const FemParams& f, std::size_t C, std::size_t N) {
    auto check = [](const ConvKernel& k, std::size_t out, std::size_t in, const char* what) {
        if (k.weights.rank() != 4 || k.out_channels() != out || k.in_channels() != in)
            throw std::invalid_argument(std::string("extractor ") + what + " kernel has shape " +
                                        shape_string(k.weights.shape()));
    };
    check(f.L1, f.L1.out_channels(), C, "L1");
    check(f.L2, C, f.L1.out_channels(), "L2");
    check(f.k, N, N, "k");
    for (const Tensor* s : {&f.lambda, &f.alpha, &f.log_inv_eps, &f.dt})
        if (s->size() != 1) throw std::invalid_argument("extractor scalars must have one element");
}

}  // namespace

std::vector<ParamRef> MsnetParams::tensors() { return collect<ParamRef>(*this); }
std::vector<ConstParamRef> MsnetParams::tensors() const { return collect<ConstParamRef>(*this); }

std::size_t MsnetParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& r : tensors()) n += r.tensor->size();
    return n;
}

std::size_t MsnetParams::active_parameter_count() const {
    std::size_t n = 0;
    for (const auto& r : tensors())
        if (r.active) n += r.tensor->size();
    return n;
}

MsnetParams init_params(std::uint64_t seed, const MsnetHyper& hyper) {
    if (hyper.features == 0 || hyper.classes == 0 || hyper.grids == 0)
        throw std::invalid_argument("network needs at least one feature, class and grid");
    const std::size_t I = hyper.features, N = hyper.classes, C = hyper.channels();
    std::mt19937_64 rng(seed);
    MsnetParams p;
    p.hyper = hyper;
    p.head = glorot_kernel(rng, I, 1, true);
    for (std::size_t h = 0; h < hyper.grids; ++h) {
        LevelParams level;
        level.down = init_fem(rng, C, N);
        level.up = init_fem(rng, C, N);
        level.restriction = glorot_kernel(rng, C, C, false);
        p.levels.push_back(std::move(level));
    }
    p.tail1 = glorot_kernel(rng, C, C, true);
    p.tail2 = glorot_kernel(rng, N, C, true);
    return p;
}

MsnetParams init_params(std::uint64_t seed, std::size_t features, std::size_t classes, std::size_t grids) {
    MsnetHyper hyper;
    hyper.features = features;
    hyper.classes = classes;
    hyper.grids = grids;
    return init_params(seed, hyper);
}

Tensor head_forward(const Tensor& f, const MsnetParams& params) {
    require_rank(f, 3, "network input");
    if (f.channels() != params.head.in_channels())
        throw std::invalid_argument("network input has " + std::to_string(f.channels()) +
                                    " channels, head expects " + std::to_string(params.head.in_channels()));
    return replicate_classes(conv2d(f, params.head), params.hyper.classes);
}

namespace detail {

std::pair<ad::NodeId, ad::NodeId> record_fem(ad::Tape& t, ad::NodeId u, ad::NodeId v, ad::NodeId f_hat,
                                             const FemNodes& fem, std::size_t features, std::size_t classes) {
    // u-step: u + dt (f_hat v - (v u + lambda L*(v L u)))
    const ad::NodeId V = t.expand_labels(v, features);
    const ad::NodeId fv = t.mul(f_hat, V);
    const ad::NodeId Vu = t.mul(V, u);
    const ad::NodeId Lstar = record_L_star(t, t.mul(V, record_L(t, u, fem)), fem);
    const ad::NodeId Au = t.add(Vu, t.scale_by(Lstar, fem.lambda));
    const ad::NodeId u_next = t.add(u, t.scale_by(t.sub(fv, Au), fem.dt));

    // v-step: softmax of inv_eps (sum_i(-1/2 (f_hat - u)^2 - lambda/2 (L u)^2) - alpha k*(1 - 2v))
    const ad::NodeId data = t.scale(t.square(t.sub(f_hat, u_next)), -0.5);
    const ad::NodeId smooth = t.scale_by(t.scale(t.square(record_L(t, u_next, fem)), -0.5), fem.lambda);
    const ad::NodeId z = t.reduce_groups(t.add(data, smooth), classes);
    const ad::NodeId p = t.scale_by(t.conv2d(t.affine(v, 1.0, -2.0), fem.k, std::nullopt), fem.alpha);
    const ad::NodeId logits = t.scale_by(t.sub(z, p), t.exp(fem.log_inv_eps));
    return {u_next, t.softmax(logits)};
}

}  // namespace detail

std::pair<Tensor, LabelField> fem_forward(const Tensor& u, const LabelField& v, const Tensor& f_hat,
                                          const FemParams& fem) {
    require_same_shape(u, f_hat, "fem_forward");
    const std::size_t N = v.classes();
    if (u.channels() % N != 0) throw std::invalid_argument("fem_forward: channels are not a multiple of classes");
    check_fem(fem, u.channels(), N);
    ad::Tape t;
    const ad::NodeId un = t.leaf(u), vn = t.leaf(v.values()), fn = t.leaf(f_hat);
    const auto nodes = fem_leaves(t, fem, false);
    const auto [u_next, v_next] = detail::record_fem(t, un, vn, fn, nodes, u.channels() / N, N);
    return {t.value(u_next), LabelField(t.value(v_next))};
}

ForwardTrace msnet_forward(const Tensor& f, const MsnetParams& params) {
    require_rank(f, 3, "network input");
    const std::size_t I = params.hyper.features, N = params.hyper.classes, C = params.hyper.channels();
    const std::size_t H = params.hyper.grids;
    if (params.levels.size() != H) throw std::invalid_argument("parameter levels do not match the grid count");
    if (f.channels() != params.head.in_channels())
        throw std::invalid_argument("network input has " + std::to_string(f.channels()) +
                                    " channels, head expects " + std::to_string(params.head.in_channels()));
    const std::size_t max_h = max_feasible_grids(f.height(), f.width());
    if (H > max_h)
        throw std::invalid_argument("input " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                                    " is too small for " + std::to_string(H) +
                                    " grids; maximal feasible grid count is " + std::to_string(max_h));
    for (const auto& level : params.levels) {
        check_fem(level.down, C, N);
        check_fem(level.up, C, N);
    }

    ForwardTrace tr;
    ad::Tape& t = tr.tape;
    tr.input = t.leaf(f);

    // Leaves in tensors() order.
    struct LevelNodes {
        detail::FemNodes down, up;
        ad::NodeId restriction;
    };
    auto kernel_leaves = [&](const ConvKernel& k) {
        const ad::NodeId w = t.leaf(k.weights, true);
        tr.params.push_back(w);
        std::optional<ad::NodeId> b;
        if (k.bias) {
            b = t.leaf(*k.bias, true);
            tr.params.push_back(*b);
        }
        return std::pair{w, b};
    };
    auto fem_nodes = [&](const FemParams& p) {
        detail::FemNodes n{};
        n.L1 = kernel_leaves(p.L1).first;
        n.L2 = kernel_leaves(p.L2).first;
        n.k = kernel_leaves(p.k).first;
        for (auto [slot, value] : {std::pair{&n.lambda, &p.lambda}, std::pair{&n.alpha, &p.alpha},
                                   std::pair{&n.log_inv_eps, &p.log_inv_eps}, std::pair{&n.dt, &p.dt}}) {
            *slot = t.leaf(*value, true);
            tr.params.push_back(*slot);
        }
        return n;
    };
    const auto head = kernel_leaves(params.head);
    std::vector<LevelNodes> lv;
    for (const auto& level : params.levels) {
        LevelNodes n{};
        n.down = fem_nodes(level.down);
        n.up = fem_nodes(level.up);
        n.restriction = kernel_leaves(level.restriction).first;
        lv.push_back(n);
    }
    const auto tail1 = kernel_leaves(params.tail1);
    const auto tail2 = kernel_leaves(params.tail2);

    const ad::NodeId f_hat = t.replicate_classes(t.conv2d(tr.input, head.first, head.second), N);
    ad::NodeId u = f_hat;
    ad::NodeId v = t.softmax(t.reduce_groups(f_hat, N));
    tr.labels.push_back(v);

    std::vector<ad::NodeId> f_level(H), u_fine(H), u_start(H);
    f_level[0] = f_hat;
    u_start[0] = u;
    std::vector<ad::NodeId> v_fine(H);
    for (std::size_t h = 0; h < H; ++h) {
        std::tie(u, v) = detail::record_fem(t, u, v, f_level[h], lv[h].down, I, N);
        tr.labels.push_back(v);
        if (h + 1 == H) break;
        u_fine[h] = u;
        v_fine[h] = v;
        u = t.conv2d(u, lv[h].restriction, std::nullopt, 2);
        u_start[h + 1] = u;
        f_level[h + 1] = t.conv2d(f_level[h], lv[h].restriction, std::nullopt, 2);
        v = t.renormalize(t.average_pool(v));
        tr.labels.push_back(v);
    }
    for (std::size_t h = H - 1; h-- > 0;) {
        const Tensor& fine = t.value(u_fine[h]);
        const std::size_t fh = fine.height(), fw = fine.width();
        u = t.add(u_fine[h], t.prolong(t.sub(u, u_start[h + 1]), fh, fw));
        v = t.renormalize(t.prolong(v, fh, fw));
        tr.labels.push_back(v);
        std::tie(u, v) = detail::record_fem(t, u, v, f_level[h], lv[h].up, I, N);
        tr.labels.push_back(v);
    }

    ad::NodeId x = t.conv2d(t.expand_labels(v, I), tail1.first, tail1.second);
    if (params.hyper.tail_relu) x = t.relu(x);
    tr.logits = t.conv2d(x, tail2.first, tail2.second);
    tr.output = t.softmax(tr.logits);
    tr.labels.push_back(tr.output);
    return tr;
}

Tensor msnet_predict(const Tensor& f, const MsnetParams& params) {
    return msnet_forward(f, params).output_value();
}

bool ForwardTrace::replay_matches() const {
    const auto values = tape.replay();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!(values[i] == tape.value(i))) return false;
    return true;
}

GradientSet msnet_backward(const ForwardTrace& trace, const Tensor& loss_grad) {
    if (!loss_grad.same_shape(trace.output_value()))
        throw std::invalid_argument("loss gradient shape " + shape_string(loss_grad.shape()) +
                                    " does not match network output " + shape_string(trace.output_value().shape()));
    const auto grads = trace.tape.backward(trace.output, loss_grad);
    GradientSet out;
    out.reserve(trace.params.size());
    for (ad::NodeId id : trace.params)
        out.push_back(grads[id] ? *grads[id] : Tensor::zeros(trace.tape.value(id).shape()));
    return out;
}

GradientSet zero_gradients(const MsnetParams& params) {
    GradientSet out;
    for (const auto& r : params.tensors()) out.push_back(Tensor::zeros(r.tensor->shape()));
    return out;
}

}  // namespace msseg
