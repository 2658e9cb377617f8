#include "msseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <omp.h>

namespace msseg {

DiceResult dice_loss(const Tensor& pred, const Tensor& target, double eps) {
    require_rank(pred, 3, "dice_loss prediction");
    require_same_shape(pred, target, "dice_loss");
    if (!(eps > 0.0)) throw std::invalid_argument("dice_loss: eps must be positive");
    const std::size_t N = pred.channels(), P = pred.plane();
    DiceResult r;
    r.grad = Tensor(pred.shape());
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        double inter = 0.0, sp = 0.0, st = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            const double y = pred[n * P + p], t = target[n * P + p];
            inter += y * t;
            sp += y;
            st += t;
        }
        const double num = 2.0 * inter + eps, den = sp + st + eps;
        total += num / den;
        // d(num/den)/dy_j = (2 t_j den - num) / den^2
        for (std::size_t p = 0; p < P; ++p)
            r.grad[n * P + p] = -(2.0 * target[n * P + p] * den - num) / (den * den) / static_cast<double>(N);
    }
    r.loss = 1.0 - total / static_cast<double>(N);
    return r;
}

double OptimizerState::learning_rate() const {
    const std::size_t interval = config.interval ? config.interval : 1;
    return config.lr * std::pow(config.decay, static_cast<double>(step / interval));
}

OptimizerState make_optimizer(const MsnetParams& params, const AdamConfig& config) {
    OptimizerState s;
    s.config = config;
    for (const auto& r : params.tensors()) {
        s.m.push_back(Tensor::zeros(r.tensor->shape()));
        s.v.push_back(Tensor::zeros(r.tensor->shape()));
    }
    return s;
}

void adam_step(MsnetParams& params, const GradientSet& grads, OptimizerState& opt) {
    auto refs = params.tensors();
    if (grads.size() != refs.size() || opt.m.size() != refs.size())
        throw std::invalid_argument("adam_step: gradient set does not match the parameters");
    const AdamConfig& c = opt.config;
    const double lr = opt.learning_rate();
    const double t = static_cast<double>(opt.step + 1);
    const double bc1 = 1.0 - std::pow(c.beta1, t), bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < refs.size(); ++k) {
        Tensor& p = *refs[k].tensor;
        if (!grads[k].same_shape(p) || !opt.m[k].same_shape(p))
            throw std::invalid_argument("adam_step: shape mismatch for " + refs[k].name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = grads[k][i];
            double& m = opt.m[k][i];
            double& v = opt.v[k][i];
            m = c.beta1 * m + (1.0 - c.beta1) * g;
            v = c.beta2 * v + (1.0 - c.beta2) * g * g;
            p[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
        }
    }
    ++opt.step;
}

std::vector<Sample> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size, double noise_std,
                                  std::size_t classes) {
    if (size < 32) throw std::invalid_argument("synthetic images must be at least 32 pixels wide");
    if (classes < 2) throw std::invalid_argument("synthetic data needs at least two classes");
    if (noise_std < 0.0) throw std::invalid_argument("noise std must be nonnegative");
    std::mt19937_64 rng(seed);
    auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    std::normal_distribution<double> noise(0.0, 1.0);
    const double S = static_cast<double>(size);

    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double bg = uniform(0.0, 0.25);
        Tensor clean({1, size, size}, bg);
        std::vector<int> index(size * size, 0);
        const int shapes = std::uniform_int_distribution<int>(1, 3)(rng);
        std::vector<double> levels;
        for (int k = 0; k < shapes; ++k) {
            double level;
            do {
                level = uniform(bg + 0.45, 1.0);
            } while (std::any_of(levels.begin(), levels.end(), [&](double l) { return std::abs(l - level) < 0.03; }));
            levels.push_back(level);
            const int cls = 1 + k % static_cast<int>(classes - 1);
            const bool disk = uniform(0.0, 1.0) < 0.5;
            const double cy = uniform(0.2 * S, 0.8 * S), cx = uniform(0.2 * S, 0.8 * S);
            const double r = uniform(S / 10.0, S / 4.0);
            const double hy = uniform(S / 12.0, S / 5.0), hx = uniform(S / 12.0, S / 5.0);
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x) {
                    const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
                    const bool in = disk ? dx * dx + dy * dy <= r * r : std::abs(dy) <= hy && std::abs(dx) <= hx;
                    if (!in) continue;
                    clean[y * size + x] = level;
                    index[y * size + x] = cls;
                }
        }
        Tensor image = clean;
        for (auto& e : image.data()) e = std::clamp(e + noise_std * noise(rng), 0.0, 1.0);
        Tensor label({classes, size, size});
        for (std::size_t p = 0; p < index.size(); ++p) label[static_cast<std::size_t>(index[p]) * size * size + p] = 1.0;
        out.push_back({std::move(image), std::move(label)});
    }
    return out;
}

std::vector<double> train(MsnetParams& params, const std::vector<Sample>& data, const TrainConfig& config,
                          OptimizerState& opt) {
    if (data.empty()) throw std::invalid_argument("training set is empty");
    if (config.batch == 0) throw std::invalid_argument("batch size must be positive");
    std::vector<double> curve;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t start = 0; start < data.size(); start += config.batch) {
            if (config.max_steps && curve.size() >= config.max_steps) return curve;
            const std::size_t B = std::min(config.batch, data.size() - start);
            std::vector<GradientSet> grads(B);
            std::vector<double> losses(B);
            std::vector<std::string> errors(B);
#pragma omp parallel for schedule(static, 1) num_threads(std::max(1, config.threads)) if (config.threads > 1)
            for (std::size_t b = 0; b < B; ++b) {
                try {
                    const Sample& s = data[start + b];
                    const ForwardTrace tr = msnet_forward(s.image, params);
                    const DiceResult d = dice_loss(tr.output_value(), s.label);
                    losses[b] = d.loss;
                    grads[b] = msnet_backward(tr, d.grad);
                } catch (const std::exception& e) {
                    errors[b] = e.what();
                }
            }
            for (const auto& e : errors)
                if (!e.empty()) throw std::runtime_error(e);
            GradientSet total = std::move(grads[0]);
            double loss = losses[0];
            for (std::size_t b = 1; b < B; ++b) {
                loss += losses[b];
                for (std::size_t k = 0; k < total.size(); ++k) total[k] = pointwise_add(total[k], grads[b][k]);
            }
            for (auto& g : total) g = scale(g, 1.0 / static_cast<double>(B));
            loss /= static_cast<double>(B);
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged: loss is " + std::to_string(loss) + " at step " +
                                         std::to_string(curve.size()));
            adam_step(params, total, opt);
            curve.push_back(loss);
            if (config.on_step) config.on_step(curve.size() - 1, loss);
        }
    }
    return curve;
}

}  // namespace msseg
