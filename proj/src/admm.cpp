#include "msseg/admm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace msseg {

const RegularityOperator& SolverConfig::regularity() const {
    static const GradOp default_op;
    return op ? *op : default_op;
}

Tensor apply_A(const Tensor& u, const Tensor& v, const RegularityOperator& op, double lambda) {
    require_same_shape(u, v, "apply_A");
    Tensor out = pointwise_mul(v, u);
    if (lambda == 0.0) return out;
    const Tensor Lu = op.forward(u);
    const Tensor weighted = pointwise_mul(broadcast_groups(v, op.groups()), Lu);
    return axpy(out, lambda, op.adjoint(weighted));
}

double estimate_operator_norm(const Tensor& v, const RegularityOperator& op, double lambda, int iterations) {
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    Tensor x(v.shape());
    for (auto& e : x.data()) e = dist(rng);
    x = scale(x, 1.0 / l2_norm(x));
    double est = 0.0;
    for (int k = 0; k < iterations; ++k) {
        Tensor y = apply_A(x, v, op, lambda);
        est = l2_norm(y);
        if (est == 0.0) return 0.0;
        x = scale(y, 1.0 / est);
    }
    return est;
}

double resolve_step(const Tensor& v, const RegularityOperator& op, const EnergyParams& params) {
    if (params.dt > 0.0) return params.dt;
    const double norm = estimate_operator_norm(v, op, params.lambda);
    return norm > 0.0 ? 0.9 / norm : 1.0;
}

Tensor subproblem_residual(const Tensor& u, const LabelField& v, const Tensor& f_hat, const RegularityOperator& op,
                           double lambda) {
    const std::size_t I = u.channels() / v.classes();
    const Tensor V = expand_labels(v.values(), I);
    return pointwise_sub(pointwise_mul(f_hat, V), apply_A(u, V, op, lambda));
}

Tensor update_u(const SolverState& state, const SolverConfig& config) {
    const auto& op = config.regularity();
    const std::size_t I = state.u.channels() / state.v.classes();
    const Tensor V = expand_labels(state.v.values(), I);
    const double dt = resolve_step(V, op, config.params);
    const Tensor r = pointwise_sub(pointwise_mul(state.f_hat, V), apply_A(state.u, V, op, config.params.lambda));
    return axpy(state.u, dt, r);
}

Tensor solve_u_exact(const SolverState& state, const SolverConfig& config, double tolerance, int max_iterations) {
    const auto& op = config.regularity();
    if (!op.is_linear()) throw std::invalid_argument("exact u-solve requires a linear regularity operator");
    const double lambda = config.params.lambda;
    const std::size_t I = state.u.channels() / state.v.classes();
    const Tensor V = expand_labels(state.v.values(), I);
    Tensor u = state.u;
    Tensor r = pointwise_sub(pointwise_mul(state.f_hat, V), apply_A(u, V, op, lambda));
    Tensor d = r;
    double rr = inner_product(r, r);
    for (int k = 0; k < max_iterations && std::sqrt(rr) >= tolerance; ++k) {
        const Tensor Ad = apply_A(d, V, op, lambda);
        const double dAd = inner_product(d, Ad);
        if (!(dAd > 0.0)) break;
        const double step = rr / dAd;
        u = axpy(u, step, d);
        r = axpy(r, -step, Ad);
        const double rr_next = inner_product(r, r);
        d = axpy(r, rr_next / rr, d);
        rr = rr_next;
    }
    return u;
}

Tensor v_logits(const Tensor& u, const LabelField& v_prev, const Tensor& f_hat, const RegularityOperator& op,
                const EnergyParams& params, const GaussianKernel& k) {
    if (!(params.epsilon > 0.0)) throw std::invalid_argument("update_v: epsilon must be positive");
    require_same_shape(u, f_hat, "update_v");
    const std::size_t N = v_prev.classes();
    const Tensor sq = group_square_norm(op.forward(u), op.groups());
    Tensor per_feature(u.shape());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = f_hat[i] - u[i];
        per_feature[i] = -0.5 * d * d - 0.5 * params.lambda * sq[i];
    }
    Tensor z = reduce_groups(per_feature, N);
    const Tensor p = subgradient_p(v_prev, k, params.alpha);
    const double inv_eps = 1.0 / params.epsilon;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - p[i]) * inv_eps;
    return z;
}

LabelField update_v(const Tensor& u, const LabelField& v_prev, const Tensor& f_hat, const RegularityOperator& op,
                    const EnergyParams& params, const GaussianKernel& k) {
    return LabelField::from_logits(v_logits(u, v_prev, f_hat, op, params, k));
}

LabelField update_v(const SolverState& state, const SolverConfig& config) {
    return update_v(state.u, state.v, state.f_hat, config.regularity(), config.params,
                    GaussianKernel(config.params.sigma));
}

namespace {

double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

}  // namespace

SolverState initial_state(const Tensor& features, const SolverConfig& config) {
    require_rank(features, 3, "solver features");
    config.params.validate();
    const std::size_t N = config.classes, I = features.channels(), P = features.plane();
    if (N == 0) throw std::invalid_argument("solver needs at least one class");
    const Tensor f_hat = replicate_classes(features, N);

    if (config.init == InitMode::FeatureCopy) {
        Tensor logits = reduce_groups(f_hat, N);
        return SolverState{f_hat, LabelField::from_logits(logits), f_hat, 0, {}};
    }

    // centroid[n][i]: the (n + 0.5)/N quantile of feature i.
    Tensor u({N * I, features.height(), features.width()});
    Tensor logits({N, features.height(), features.width()});
    for (std::size_t i = 0; i < I; ++i) {
        auto ch = features.channel(i);
        const std::vector<double> values(ch.begin(), ch.end());
        for (std::size_t n = 0; n < N; ++n) {
            const double c = quantile(values, (static_cast<double>(n) + 0.5) / static_cast<double>(N));
            auto un = u.channel(n * I + i);
            std::fill(un.begin(), un.end(), c);
            for (std::size_t p = 0; p < P; ++p) {
                const double d = ch[p] - c;
                logits[n * P + p] -= 0.5 * d * d / config.params.epsilon;
            }
        }
    }
    return SolverState{std::move(u), LabelField::from_logits(logits), f_hat, 0, {}};
}

SolverState admm_iterate(SolverState state, const SolverConfig& config) {
    if (config.iterations < 0) throw std::invalid_argument("iteration count must be nonnegative");
    const auto& op = config.regularity();
    const GaussianKernel k(config.params.sigma);
    for (int t = 0; t < config.iterations; ++t) {
        state.u = config.exact_u ? solve_u_exact(state, config) : update_u(state, config);
        LabelField v_next = update_v(state.u, state.v, state.f_hat, op, config.params, k);
        if (config.on_v_update) config.on_v_update(v_next);
        if (config.record_energy) {
            state.energy_trace.push_back(
                energy_terms(state.u, v_next, state.f_hat, state.v, op, config.params, k).total());
        }
        state.v = std::move(v_next);
        ++state.t;
    }
    return state;
}

SolverState admm_segment(const Tensor& features, const SolverConfig& config) {
    return admm_iterate(initial_state(features, config), config);
}

SolverState admm_segment(const Tensor& features, const SolverConfig& config, const LabelField& v0) {
    SolverState s = initial_state(features, config);
    if (!v0.values().same_shape(s.v.values()))
        throw std::invalid_argument("admm_segment: v0 shape " + shape_string(v0.values().shape()) +
                                    " does not match " + shape_string(s.v.values().shape()));
    s.v = v0;
    return admm_iterate(std::move(s), config);
}

}  // namespace msseg
