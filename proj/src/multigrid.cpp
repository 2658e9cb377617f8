#include "msseg/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msseg {

int MgConfig::smoothing_at(std::size_t level) const {
    return level - 1 < smoothing.size() ? smoothing[level - 1] : 1;
}

RegularityOperatorPtr MgConfig::op_at(std::size_t level) const {
    if (level - 1 < ops.size() && ops[level - 1]) return ops[level - 1];
    return std::make_shared<GradOp>(std::ldexp(1.0, static_cast<int>(level) - 1));
}

SolverConfig MgConfig::solver_config() const {
    SolverConfig sc;
    sc.params = params;
    sc.classes = classes;
    sc.op = op_at(1);
    sc.init = init;
    return sc;
}

std::size_t max_feasible_grids(std::size_t h, std::size_t w) {
    std::size_t m = std::min(h, w), levels = 0;
    while (m > 0) {
        ++levels;
        m /= 2;
    }
    return levels;
}

Tensor restrict_grid(const Tensor& x, RestrictionMode mode, const ConvKernel* kernel) {
    if (mode == RestrictionMode::AveragePool) return average_pool2x(x);
    if (!kernel) throw std::invalid_argument("learned restriction requires a stride-2 kernel");
    if (kernel->in_channels() == x.channels() || kernel->in_channels() != 1 || kernel->out_channels() != 1)
        return conv2d(x, *kernel, 2, Padding::SameZero);
    // a single-channel stencil is shared by every channel
    const std::size_t P = x.plane();
    Tensor out({x.channels(), coarse_extent(x.height()), coarse_extent(x.width())});
    for (std::size_t c = 0; c < x.channels(); ++c) {
        Tensor plane({1, x.height(), x.width()}, std::vector<double>(x.raw() + c * P, x.raw() + (c + 1) * P));
        const Tensor r = conv2d(plane, *kernel, 2, Padding::SameZero);
        std::copy(r.raw(), r.raw() + r.size(), out.raw() + c * r.size());
    }
    return out;
}

Tensor prolong(const Tensor& coarse, std::size_t fine_h, std::size_t fine_w) {
    require_rank(coarse, 3, "prolong");
    if (coarse_extent(fine_h) != coarse.height() || coarse_extent(fine_w) != coarse.width())
        throw std::invalid_argument("prolong: fine extent " + std::to_string(fine_h) + "x" + std::to_string(fine_w) +
                                    " is not the parent of coarse " + shape_string(coarse.shape()));
    return fit_extent(upsample_bilinear2x(coarse), fine_h, fine_w);
}

namespace {

Tensor apply_level_A(const GridLevel& level, const Tensor& u, double lambda) {
    return apply_A(u, expand_labels(level.v0.values(), level.features()), *level.op, lambda);
}

void step(const MgConfig& config, std::string_view name) {
    if (config.on_step) config.on_step(name);
}

LabelField restrict_labels(const LabelField& v, const MgConfig& config) {
    const ConvKernel* kernel = config.restriction_kernel ? &*config.restriction_kernel : nullptr;
    return LabelField::renormalized(restrict_grid(v.values(), config.restriction, kernel));
}

}  // namespace

Tensor residual(const GridLevel& level, double lambda) {
    return pointwise_sub(level.F, apply_level_A(level, level.u, lambda));
}

Tensor coarse_rhs(const Tensor& restricted_residual, const GridLevel& coarse, double lambda) {
    return pointwise_add(restricted_residual, apply_level_A(coarse, coarse.u0, lambda));
}

Tensor coarse_rhs(const GridLevel& fine, const GridLevel& coarse, double lambda, RestrictionMode mode,
                  const ConvKernel* kernel) {
    return coarse_rhs(restrict_grid(residual(fine, lambda), mode, kernel), coarse, lambda);
}

void smooth(GridLevel& level, int steps, const MgConfig& config, const LabelField& anchor, const GaussianKernel& k) {
    if (steps < 1) throw std::invalid_argument("smoothing count must be at least 1");
    for (int s = 0; s < steps; ++s) {
        const Tensor r = residual(level, config.params.lambda);
        level.u = axpy(level.u, level.dt, r);
    }
    step(config, "smooth");
    if (config.freeze_v) return;
    level.v = update_v(level.u, anchor, level.f, *level.op, config.params, k);
    if (config.on_v_update) config.on_v_update(level.v);
    step(config, "softmax");
}

SolverState v_cycle(SolverState state, const MgConfig& config) {
    config.params.validate();
    const std::size_t H = config.grids;
    if (H < 1) throw std::invalid_argument("grid count must be at least 1");
    const std::size_t max_h = max_feasible_grids(state.u.height(), state.u.width());
    if (H > max_h)
        throw std::invalid_argument("image " + std::to_string(state.u.height()) + "x" +
                                    std::to_string(state.u.width()) + " is too small for " + std::to_string(H) +
                                    " grids; maximal feasible grid count is " + std::to_string(max_h));
    const ConvKernel* kernel = config.restriction_kernel ? &*config.restriction_kernel : nullptr;
    const double lambda = config.params.lambda;
    const GaussianKernel k(config.params.sigma);

    std::vector<GridLevel> levels(H);
    {
        GridLevel& top = levels[0];
        top.index = 1;
        top.op = config.op_at(1);
        top.f = state.f_hat;
        top.u = state.u;
        top.u0 = state.u;
        top.v = state.v;
        top.v0 = state.v;
        top.F = pointwise_mul(state.f_hat, expand_labels(state.v.values(), top.features()));
        top.dt = resolve_step(expand_labels(top.v0.values(), top.features()), *top.op, config.params);
    }

    for (std::size_t h = 1; h <= H; ++h) {
        GridLevel& level = levels[h - 1];
        smooth(level, config.smoothing_at(h), config, level.v0, k);
        if (h == H) break;
        const Tensor r = residual(level, lambda);
        step(config, "residual");
        GridLevel& coarse = levels[h];
        coarse.index = h + 1;
        coarse.op = config.op_at(h + 1);
        coarse.u0 = restrict_grid(level.u, config.restriction, kernel);
        coarse.u = coarse.u0;
        step(config, "restrict_u");
        coarse.v0 = restrict_labels(level.v, config);
        coarse.v = coarse.v0;
        step(config, "restrict_v");
        coarse.dt = resolve_step(expand_labels(coarse.v0.values(), coarse.features()), *coarse.op, config.params);
        step(config, "build_A");
        coarse.F = coarse_rhs(restrict_grid(r, config.restriction, kernel), coarse, lambda);
        step(config, "coarse_rhs");
        coarse.f = restrict_grid(level.f, config.restriction, kernel);
        step(config, "restrict_f");
    }

    for (std::size_t h = H; h >= 2; --h) {
        GridLevel& coarse = levels[h - 1];
        GridLevel& fine = levels[h - 2];
        if (config.coarse_correction)
            fine.u = pointwise_add(fine.u, prolong(pointwise_sub(coarse.u, coarse.u0), fine.height(), fine.width()));
        step(config, "prolong_u");
        if (!config.freeze_v) {
            fine.v = LabelField::renormalized(prolong(coarse.v.values(), fine.height(), fine.width()));
            step(config, "prolong_v");
        }
        const LabelField anchor = fine.v;
        smooth(fine, config.smoothing_at(h - 1), config, anchor, k);
    }

    state.u = std::move(levels[0].u);
    state.v = std::move(levels[0].v);
    ++state.t;
    return state;
}

SolverState v_cycle(const Tensor& features, const MgConfig& config) {
    return v_cycle(initial_state(features, config.solver_config()), config);
}

SolverState multigrid_segment(const Tensor& features, const MgConfig& config, int cycles) {
    if (cycles < 0) throw std::invalid_argument("cycle count must be nonnegative");
    SolverState state = initial_state(features, config.solver_config());
    for (int c = 0; c < cycles; ++c) state = v_cycle(std::move(state), config);
    return state;
}

}  // namespace msseg
