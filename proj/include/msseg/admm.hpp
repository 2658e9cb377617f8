#pragma once

// Single-grid alternating minimisation: an explicit time-marching u-step
// followed by the closed-form softmax v-step.

#include <cstddef>
#include <functional>
#include <vector>

#include "msseg/energy.hpp"

namespace msseg {

enum class InitMode {
    /// u_n = per-class intensity centroid, v = softmax of the centroid fit.
    ClassCentroids,
    /// u_n = f_hat for every class, v = softmax of identical class copies
    /// (uniform). Symmetric, so it only moves once L breaks the symmetry.
    FeatureCopy,
};

using LabelObserver = std::function<void(const LabelField&)>;

struct SolverConfig {
    EnergyParams params;
    std::size_t classes = 2;
    int iterations = 50;
    RegularityOperatorPtr op;  ///< defaults to GradOp when null
    bool record_energy = false;
    /// Solve the u-subproblem to a 1e-10 residual (conjugate gradients)
    /// instead of taking a single explicit step.
    bool exact_u = false;
    InitMode init = InitMode::ClassCentroids;
    LabelObserver on_v_update;

    const RegularityOperator& regularity() const;
};

struct SolverState {
    Tensor u;       ///< C x H x W, C = I*N
    LabelField v;   ///< N x H x W
    Tensor f_hat;   ///< C x H x W, N stacked copies of the I features
    int t = 0;
    std::vector<double> energy_trace;
};

/// v (.) u + lambda L*(v (.) L u), with v already expanded to u's channels.
Tensor apply_A(const Tensor& u, const Tensor& v, const RegularityOperator& op, double lambda);

/// Largest eigenvalue of A by 20 power iterations from a fixed start vector.
double estimate_operator_norm(const Tensor& v, const RegularityOperator& op, double lambda, int iterations = 20);

/// params.dt, or 0.9 / ||A|| when params.dt is 0.
double resolve_step(const Tensor& v, const RegularityOperator& op, const EnergyParams& params);

/// One step u + dt (f_hat (.) v - A u).
Tensor update_u(const SolverState& state, const SolverConfig& config);

/// Conjugate gradients on A u = f_hat (.) v from the current u.
Tensor solve_u_exact(const SolverState& state, const SolverConfig& config, double tolerance = 1e-10,
                     int max_iterations = 20000);

/// Softmax v-step. `v_prev` anchors the linearised length term.
LabelField update_v(const Tensor& u, const LabelField& v_prev, const Tensor& f_hat, const RegularityOperator& op,
                    const EnergyParams& params, const GaussianKernel& k);
LabelField update_v(const SolverState& state, const SolverConfig& config);

/// Per-class logits before the softmax (exposed for tests).
Tensor v_logits(const Tensor& u, const LabelField& v_prev, const Tensor& f_hat, const RegularityOperator& op,
                const EnergyParams& params, const GaussianKernel& k);

/// Initial (u, v) for I x H x W features.
SolverState initial_state(const Tensor& features, const SolverConfig& config);

/// Runs config.iterations outer steps starting from `state`.
SolverState admm_iterate(SolverState state, const SolverConfig& config);

SolverState admm_segment(const Tensor& features, const SolverConfig& config);
SolverState admm_segment(const Tensor& features, const SolverConfig& config, const LabelField& v0);

/// u-subproblem residual f_hat (.) v - A u.
Tensor subproblem_residual(const Tensor& u, const LabelField& v, const Tensor& f_hat, const RegularityOperator& op,
                           double lambda);

}  // namespace msseg
