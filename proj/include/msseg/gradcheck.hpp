#pragma once

// Central-difference check of msnet_backward on a small random problem.

#include <cstdint>
#include <string>

#include "msseg/msnet.hpp"

namespace msseg {

struct GradCheckResult {
    double max_relative = 0.0;  ///< |a - n| / max(|a|, |n|, floor)
    double max_absolute = 0.0;
    std::size_t checked = 0;
    std::string worst;  ///< parameter name and index of the largest relative error
};

inline constexpr double kGradCheckFloor = 1e-6;

/// Dice loss of the network on a random 1 x size x size image against a
/// random two-class target, every active parameter perturbed by +-step.
GradCheckResult gradient_check(std::uint64_t seed, const MsnetHyper& hyper, std::size_t size = 16,
                               double step = 1e-5);

}  // namespace msseg
