#pragma once

// Full-approximation-scheme V-cycle over the segmentation model. Each level
// keeps the iterate it started from (u0, v0); v0 defines that level's
// operator A^h = v0 + lambda L* v0 L for the whole cycle.

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "msseg/admm.hpp"

namespace msseg {

enum class RestrictionMode { AveragePool, LearnedConv };

struct GridLevel {
    std::size_t index = 1;  ///< 1 = finest
    Tensor f;               ///< restricted features, C channels
    Tensor F;               ///< FAS right-hand side
    Tensor u;
    Tensor u0;
    LabelField v = LabelField::uniform(1, 1, 1);
    LabelField v0 = LabelField::uniform(1, 1, 1);
    double dt = 0.0;
    RegularityOperatorPtr op;

    std::size_t height() const { return u.height(); }
    std::size_t width() const { return u.width(); }
    std::size_t features() const { return u.channels() / v.classes(); }
};

struct MgConfig {
    std::size_t grids = 3;
    std::vector<int> smoothing;  ///< T_h per level; missing entries are 1
    RestrictionMode restriction = RestrictionMode::AveragePool;
    /// Stride-2 kernel for LearnedConv; a 1->1 kernel is shared across channels.
    std::optional<ConvKernel> restriction_kernel;
    EnergyParams params;
    std::size_t classes = 2;
    /// L per level; a missing entry is GradOp with spacing 2^(h-1).
    std::vector<RegularityOperatorPtr> ops;
    InitMode init = InitMode::ClassCentroids;
    /// Skip every softmax and v transfer: the cycle becomes a linear FAS
    /// cycle for the operator fixed by the initial v.
    bool freeze_v = false;
    /// Disable to drop the prolonged correction (post-smoothing only).
    bool coarse_correction = true;
    std::function<void(std::string_view)> on_step;
    LabelObserver on_v_update;

    int smoothing_at(std::size_t level) const;
    RegularityOperatorPtr op_at(std::size_t level) const;
    SolverConfig solver_config() const;
};

/// Largest grid count for an h x w image: floor(log2(min(h, w))) + 1.
std::size_t max_feasible_grids(std::size_t h, std::size_t w);

Tensor restrict_grid(const Tensor& x, RestrictionMode mode, const ConvKernel* kernel = nullptr);
/// Bilinear 2x upsampling cropped/padded to fine_h x fine_w.
Tensor prolong(const Tensor& coarse, std::size_t fine_h, std::size_t fine_w);

/// F_h - A^h u_h.
Tensor residual(const GridLevel& level, double lambda);
/// I(r_h) + A^{h+1} u^{h+1,0}; `coarse.u0` and `coarse.v0` must be set.
Tensor coarse_rhs(const Tensor& restricted_residual, const GridLevel& coarse, double lambda);
Tensor coarse_rhs(const GridLevel& fine, const GridLevel& coarse, double lambda, RestrictionMode mode,
                  const ConvKernel* kernel = nullptr);

/// T steps of u <- u + dt (F - A u), then one softmax anchored at `anchor`.
void smooth(GridLevel& level, int steps, const MgConfig& config, const LabelField& anchor,
            const GaussianKernel& k);

/// One V-cycle from the given finest-level state.
SolverState v_cycle(SolverState state, const MgConfig& config);
/// One V-cycle from the default initialisation.
SolverState v_cycle(const Tensor& features, const MgConfig& config);

SolverState multigrid_segment(const Tensor& features, const MgConfig& config, int cycles);

}  // namespace msseg
