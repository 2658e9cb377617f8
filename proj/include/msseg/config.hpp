#pragma once

// Plain-text run configuration: one key=value per line, '#' starts a
// comment, unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "msseg/energy.hpp"

namespace msseg {

struct RunConfig {
    std::size_t classes = 2;
    std::size_t features = 8;
    double lambda = 0.1;
    double alpha = 1.0;
    double epsilon = 0.1;
    double sigma = 2.0;
    double gamma = 0.0;
    double dt = 0.0;  ///< 0 = 0.9 / ||A|| estimated per solve
    int iters = 50;
    std::size_t grids = 3;
    int th = 1;  ///< smoothing steps per level
    std::string mode = "admm";
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double lr_decay = 0.8;
    std::size_t lr_interval = 200;
    std::size_t epochs = 1;
    std::size_t batch = 4;

    EnergyParams energy() const;
    void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace msseg
