#pragma once

// Random generators and deliberately naive reference implementations used
// as oracles by the unit and acceptance tests. Nothing here calls the
// library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "msseg/energy.hpp"
#include "msseg/tensor.hpp"

namespace testsupport {

using msseg::Padding;
using msseg::Shape;
using msseg::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(std::move(shape));
    for (auto& e : t.data()) e = d(rng);
    return t;
}

inline Tensor random_simplex(std::size_t n, std::size_t h, std::size_t w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.01, 1.0);
    Tensor t({n, h, w});
    const std::size_t P = h * w;
    for (std::size_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += (t[c * P + p] = d(rng));
        for (std::size_t c = 0; c < n; ++c) t[c * P + p] /= s;
    }
    return t;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Padded sample following the documented padding rules.
inline double padded_at(const Tensor& x, std::size_t c, long y, long xx, Padding pad) {
    const long H = static_cast<long>(x.height()), W = static_cast<long>(x.width());
    if (pad == Padding::SameReplicate) {
        y = std::clamp(y, 0L, H - 1);
        xx = std::clamp(xx, 0L, W - 1);
    } else if (y < 0 || y >= H || xx < 0 || xx >= W) {
        return 0.0;
    }
    return x.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
}

/// Direct cross-correlation: out[o,y,x] = b[o] + sum w[o,i,a,b] x[i, s y + a - p, s x + b - p].
inline Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride, Padding pad) {
    const std::size_t O = w.dim(0), I = w.dim(1), KH = w.dim(2), KW = w.dim(3);
    const std::size_t H = x.height(), W = x.width();
    std::size_t OH, OW;
    long pt = 0, pl = 0;
    if (pad == Padding::Valid) {
        OH = (H - KH) / stride + 1;
        OW = (W - KW) / stride + 1;
    } else {
        OH = (H + stride - 1) / stride;
        OW = (W + stride - 1) / stride;
        pt = static_cast<long>(KH / 2);
        pl = static_cast<long>(KW / 2);
    }
    Tensor out({O, OH, OW});
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t y = 0; y < OH; ++y)
            for (std::size_t xx = 0; xx < OW; ++xx) {
                double s = bias ? (*bias)[o] : 0.0;
                for (std::size_t i = 0; i < I; ++i)
                    for (std::size_t a = 0; a < KH; ++a)
                        for (std::size_t b = 0; b < KW; ++b) {
                            const long sy = static_cast<long>(y * stride + a) - pt;
                            const long sx = static_cast<long>(xx * stride + b) - pl;
                            s += w[((o * I + i) * KH + a) * KW + b] * padded_at(x, i, sy, sx, pad);
                        }
                out.at(o, y, xx) = s;
            }
    return out;
}

/// Gaussian blur straight from the sampled formula, replicate padding.
inline Tensor naive_gaussian_blur(const Tensor& x, double sigma) {
    const long r = static_cast<long>(std::ceil(3.0 * sigma));
    double total = 0.0;
    for (long a = -r; a <= r; ++a)
        for (long b = -r; b <= r; ++b) total += std::exp(-(a * a + b * b) / (2.0 * sigma * sigma));
    Tensor out(x.shape());
    for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t y = 0; y < x.height(); ++y)
            for (std::size_t xx = 0; xx < x.width(); ++xx) {
                double s = 0.0;
                for (long a = -r; a <= r; ++a)
                    for (long b = -r; b <= r; ++b)
                        s += std::exp(-(a * a + b * b) / (2.0 * sigma * sigma)) / total *
                             padded_at(x, c, static_cast<long>(y) + a, static_cast<long>(xx) + b,
                                       Padding::SameReplicate);
                out.at(c, y, xx) = s;
            }
    return out;
}

/// Forward differences (last row/column 0), divided by h; layout: dx block, dy block.
inline Tensor naive_gradient(const Tensor& u, double h = 1.0) {
    const std::size_t C = u.channels(), H = u.height(), W = u.width();
    Tensor g({2 * C, H, W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                g.at(c, y, x) = x + 1 < W ? (u.at(c, y, x + 1) - u.at(c, y, x)) / h : 0.0;
                g.at(C + c, y, x) = y + 1 < H ? (u.at(c, y + 1, x) - u.at(c, y, x)) / h : 0.0;
            }
    return g;
}

/// Transpose of naive_gradient written as a negative divergence stencil.
inline Tensor naive_gradient_adjoint(const Tensor& g, double h = 1.0) {
    const std::size_t C = g.channels() / 2, H = g.height(), W = g.width();
    Tensor u({C, H, W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                double s = 0.0;
                if (x + 1 < W) s -= g.at(c, y, x);
                if (x >= 1) s += g.at(c, y, x - 1);
                if (y + 1 < H) s -= g.at(C + c, y, x);
                if (y >= 1) s += g.at(C + c, y - 1, x);
                u.at(c, y, x) = s / h;
            }
    return u;
}

/// Bilinear 2x sample of a single plane at fine pixel (i, j), half-pixel centres.
inline double bilinear_sample(const Tensor& x, std::size_t c, std::size_t i, std::size_t j) {
    auto axis = [](std::size_t k, std::size_t n, std::size_t& lo, std::size_t& hi, double& t) {
        double s = std::max(0.0, (k + 0.5) / 2.0 - 0.5);
        lo = std::min(static_cast<std::size_t>(std::floor(s)), n - 1);
        hi = std::min(lo + 1, n - 1);
        t = std::min(s - static_cast<double>(lo), 1.0);
        if (hi == lo) t = 0.0;
    };
    std::size_t y0, y1, x0, x1;
    double ty, tx;
    axis(i, x.height(), y0, y1, ty);
    axis(j, x.width(), x0, x1, tx);
    return (1 - ty) * ((1 - tx) * x.at(c, y0, x0) + tx * x.at(c, y0, x1)) +
           ty * ((1 - tx) * x.at(c, y1, x0) + tx * x.at(c, y1, x1));
}

/// Noisy two-phase disk image: intensity 1 inside, 0 outside, plus noise.
struct DiskProblem {
    Tensor image;            ///< 1 x n x n
    std::vector<int> mask;   ///< clean class map (1 inside)
};

inline DiskProblem noisy_disk(std::size_t n, double radius, double noise_std, std::uint64_t seed) {
    DiskProblem d{Tensor({1, n, n}), std::vector<int>(n * n)};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_std);
    const double c = static_cast<double>(n) / 2.0;
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double dy = y + 0.5 - c, dx = x + 0.5 - c;
            const int in = dx * dx + dy * dy <= radius * radius;
            d.mask[y * n + x] = in;
            d.image[y * n + x] = in + noise(rng);
        }
    return d;
}

/// Dice of the argmax foreground (class 1) against a class map, counted directly.
inline double foreground_dice(const Tensor& v, const std::vector<int>& mask) {
    const std::size_t P = v.plane();
    std::size_t inter = 0, a = 0, b = 0;
    for (std::size_t p = 0; p < P; ++p) {
        const bool fg = v[P + p] > v[p];
        a += fg;
        b += mask[p] == 1;
        inter += fg && mask[p] == 1;
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

inline bool on_simplex(const Tensor& v, double tol = 1e-9) {
    const std::size_t N = v.channels(), P = v.plane();
    for (std::size_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < N; ++c) {
            const double e = v[c * P + p];
            if (!(e >= 0.0 && e <= 1.0)) return false;
            s += e;
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace testsupport
