#include "msseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "msseg/training.hpp"

namespace msseg {

GradCheckResult gradient_check(std::uint64_t seed, const MsnetHyper& hyper, std::size_t size, double step) {
    MsnetParams params = init_params(seed, hyper);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cls(0, hyper.classes - 1);
    Tensor image({1, size, size});
    for (auto& e : image.data()) e = unit(rng);
    Tensor target({hyper.classes, size, size});
    const std::size_t P = size * size;
    for (std::size_t p = 0; p < P; ++p) target[cls(rng) * P + p] = 1.0;

    const ForwardTrace trace = msnet_forward(image, params);
    const GradientSet grads = msnet_backward(trace, dice_loss(trace.output_value(), target).grad);
    auto loss = [&] { return dice_loss(msnet_predict(image, params), target).loss; };

    GradCheckResult r;
    auto refs = params.tensors();
    for (std::size_t k = 0; k < refs.size(); ++k) {
        if (!refs[k].active) continue;
        Tensor& t = *refs[k].tensor;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double x0 = t[i];
            t[i] = x0 + step;
            const double up = loss();
            t[i] = x0 - step;
            const double down = loss();
            t[i] = x0;
            const double numeric = (up - down) / (2.0 * step), analytic = grads[k][i];
            const double abs_err = std::abs(numeric - analytic);
            const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic), kGradCheckFloor});
            r.max_absolute = std::max(r.max_absolute, abs_err);
            if (rel > r.max_relative || r.checked == 0) {
                r.max_relative = rel;
                r.worst = refs[k].name + "[" + std::to_string(i) + "]";
            }
            ++r.checked;
        }
    }
    return r;
}

}  // namespace msseg
