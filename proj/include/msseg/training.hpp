#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "msseg/msnet.hpp"

namespace msseg {

struct Sample {
    Tensor image;  ///< 1 x H x W in [0, 1]
    Tensor label;  ///< one-hot N x H x W
};

inline constexpr double kDiceEpsilon = 1e-5;

struct DiceResult {
    double loss = 0.0;
    Tensor grad;  ///< d loss / d pred
};

/// 1 - (1/N) sum_n (2 sum_j y y* + eps) / (sum_j y + sum_j y* + eps).
DiceResult dice_loss(const Tensor& pred, const Tensor& target, double eps = kDiceEpsilon);

struct AdamConfig {
    double lr = 1e-3;
    double decay = 0.8;
    std::size_t interval = 200;  ///< optimiser steps between decays
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    std::vector<Tensor> m, v;
    std::size_t step = 0;

    /// lr * decay^floor(step / interval)
    double learning_rate() const;
};

OptimizerState make_optimizer(const MsnetParams& params, const AdamConfig& config = {});

void adam_step(MsnetParams& params, const GradientSet& grads, OptimizerState& opt);

/// Random disks and rectangles (1 to 3 per image) on a darker background,
/// Gaussian noise, values clamped to [0, 1]. Shape k is labelled class
/// 1 + k mod (N - 1).
std::vector<Sample> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size, double noise_std,
                                  std::size_t classes = 2);

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch = 4;
    std::size_t max_steps = 0;  ///< 0 = no limit
    int threads = 1;            ///< batch members evaluated concurrently
    std::function<void(std::size_t step, double loss)> on_step;
};

/// Forward, dice loss, backward and one Adam step per batch. Batch gradients
/// are summed in sample order and divided by the batch size. Returns the
/// mean batch loss of every step.
std::vector<double> train(MsnetParams& params, const std::vector<Sample>& data, const TrainConfig& config,
                          OptimizerState& opt);

}  // namespace msseg
