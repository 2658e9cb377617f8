#include "msseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msseg {

ConvKernel::ConvKernel(Tensor w, std::optional<Tensor> b) : weights(std::move(w)), bias(std::move(b)) {
    require_rank(weights, 4, "ConvKernel weights");
    if (bias && bias->size() != weights.dim(0))
        throw std::invalid_argument("ConvKernel: bias length must equal out channels");
}

Tensor conv2d(const Tensor& input, const ConvKernel& kernel, std::size_t stride, Padding padding) {
    return kernels::parallel::conv2d(input, kernel.weights, kernel.bias_ptr(), stride, padding);
}

Tensor transpose_conv2d(const Tensor& input, const ConvKernel& kernel, std::size_t stride, Padding padding,
                        std::size_t out_h, std::size_t out_w) {
    require_rank(input, 3, "transpose_conv2d input");
    if (out_h == 0 || out_w == 0) {
        if (padding == Padding::Valid) {
            out_h = (input.height() - 1) * stride + kernel.kernel_h();
            out_w = (input.width() - 1) * stride + kernel.kernel_w();
        } else {
            out_h = input.height() * stride;
            out_w = input.width() * stride;
        }
    }
    return kernels::parallel::transpose_conv2d(input, kernel.weights, stride, padding, out_h, out_w);
}

Tensor conv2d_weight_grad(const Tensor& input, const Tensor& grad_out, std::size_t kh, std::size_t kw,
                          std::size_t stride, Padding padding) {
    return kernels::parallel::conv2d_weight_grad(input, grad_out, kh, kw, stride, padding);
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel2d, Padding padding) {
    return kernels::parallel::depthwise_conv2d(input, kernel2d, padding);
}

// --- resampling -------------------------------------------------------------

namespace {

struct Tap {
    std::size_t lo, hi;
    double w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
};

// Source taps for output index i of a 2x upsampling of an extent-n axis.
Tap upsample_tap(std::size_t i, std::size_t n) {
    double src = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > n - 1) lo = n - 1;
    const std::size_t hi = std::min(lo + 1, n - 1);
    return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

Tensor upsample_bilinear2x(const Tensor& input) {
    require_rank(input, 3, "upsample_bilinear2x");
    const std::size_t C = input.channels(), H = input.height(), W = input.width();
    Tensor out({C, 2 * H, 2 * W});
    std::vector<Tap> ty(2 * H), tx(2 * W);
    for (std::size_t i = 0; i < 2 * H; ++i) ty[i] = upsample_tap(i, H);
    for (std::size_t j = 0; j < 2 * W; ++j) tx[j] = upsample_tap(j, W);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < 2 * H; ++i) {
            const auto& a = ty[i];
            for (std::size_t j = 0; j < 2 * W; ++j) {
                const auto& b = tx[j];
                const double top = (1.0 - b.w_hi) * input.at(c, a.lo, b.lo) + b.w_hi * input.at(c, a.lo, b.hi);
                const double bot = (1.0 - b.w_hi) * input.at(c, a.hi, b.lo) + b.w_hi * input.at(c, a.hi, b.hi);
                out.at(c, i, j) = (1.0 - a.w_hi) * top + a.w_hi * bot;
            }
        }
    }
    return out;
}

Tensor upsample_bilinear2x_adjoint(const Tensor& grad, std::size_t h, std::size_t w) {
    require_rank(grad, 3, "upsample_bilinear2x_adjoint");
    if (grad.height() != 2 * h || grad.width() != 2 * w)
        throw std::invalid_argument("upsample_bilinear2x_adjoint: gradient extent does not match 2x coarse extent");
    const std::size_t C = grad.channels();
    Tensor out({C, h, w});
    std::vector<Tap> ty(2 * h), tx(2 * w);
    for (std::size_t i = 0; i < 2 * h; ++i) ty[i] = upsample_tap(i, h);
    for (std::size_t j = 0; j < 2 * w; ++j) tx[j] = upsample_tap(j, w);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < 2 * h; ++i) {
            const auto& a = ty[i];
            for (std::size_t j = 0; j < 2 * w; ++j) {
                const auto& b = tx[j];
                const double g = grad.at(c, i, j);
                const double gt = (1.0 - a.w_hi) * g, gb = a.w_hi * g;
                out.at(c, a.lo, b.lo) += (1.0 - b.w_hi) * gt;
                out.at(c, a.lo, b.hi) += b.w_hi * gt;
                out.at(c, a.hi, b.lo) += (1.0 - b.w_hi) * gb;
                out.at(c, a.hi, b.hi) += b.w_hi * gb;
            }
        }
    }
    return out;
}

Tensor fit_extent(const Tensor& input, std::size_t h, std::size_t w) {
    require_rank(input, 3, "fit_extent");
    if (input.height() == h && input.width() == w) return input;
    const std::size_t C = input.channels(), H = input.height(), W = input.width();
    Tensor out({C, h, w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at(c, i, j) = input.at(c, std::min(i, H - 1), std::min(j, W - 1));
    return out;
}

Tensor fit_extent_adjoint(const Tensor& grad, std::size_t h, std::size_t w) {
    require_rank(grad, 3, "fit_extent_adjoint");
    if (grad.height() == h && grad.width() == w) return grad;
    const std::size_t C = grad.channels();
    Tensor out({C, h, w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < grad.height(); ++i)
            for (std::size_t j = 0; j < grad.width(); ++j)
                out.at(c, std::min(i, h - 1), std::min(j, w - 1)) += grad.at(c, i, j);
    return out;
}

std::size_t coarse_extent(std::size_t n) { return (n + 1) / 2; }

Tensor average_pool2x(const Tensor& input) {
    require_rank(input, 3, "average_pool2x");
    const std::size_t C = input.channels(), H = input.height(), W = input.width();
    const std::size_t h = coarse_extent(H), w = coarse_extent(W);
    Tensor out({C, h, w});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            const std::size_t y1 = std::min(2 * i + 2, H);
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t x1 = std::min(2 * j + 2, W);
                double acc = 0.0;
                for (std::size_t y = 2 * i; y < y1; ++y)
                    for (std::size_t x = 2 * j; x < x1; ++x) acc += input.at(c, y, x);
                out.at(c, i, j) = acc / static_cast<double>((y1 - 2 * i) * (x1 - 2 * j));
            }
        }
    }
    return out;
}

Tensor average_pool2x_adjoint(const Tensor& grad, std::size_t fine_h, std::size_t fine_w) {
    require_rank(grad, 3, "average_pool2x_adjoint");
    if (grad.height() != coarse_extent(fine_h) || grad.width() != coarse_extent(fine_w))
        throw std::invalid_argument("average_pool2x_adjoint: gradient extent does not match fine extent");
    const std::size_t C = grad.channels();
    Tensor out({C, fine_h, fine_w});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < fine_h; ++y) {
            const std::size_t i = y / 2;
            const std::size_t ny = std::min(2 * i + 2, fine_h) - 2 * i;
            for (std::size_t x = 0; x < fine_w; ++x) {
                const std::size_t j = x / 2;
                const std::size_t nx = std::min(2 * j + 2, fine_w) - 2 * j;
                out.at(c, y, x) = grad.at(c, i, j) / static_cast<double>(ny * nx);
            }
        }
    }
    return out;
}

// --- pointwise ------------------------------------------------------------

Tensor channel_softmax(const Tensor& logits) {
    require_rank(logits, 3, "channel_softmax");
    const std::size_t N = logits.channels(), P = logits.plane();
    Tensor out(logits.shape());
    const double* z = logits.raw();
    double* v = out.raw();
    for (std::size_t p = 0; p < P; ++p) {
        double m = z[p];
        for (std::size_t n = 1; n < N; ++n) m = std::max(m, z[n * P + p]);
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double e = std::exp(z[n * P + p] - m);
            v[n * P + p] = e;
            s += e;
        }
        for (std::size_t n = 0; n < N; ++n) v[n * P + p] /= s;
    }
    return out;
}

namespace {

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F f) {
    require_same_shape(a, b, what);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

template <class F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

}  // namespace

Tensor relu(const Tensor& input) {
    return map(input, [](double x) { return x > 0.0 ? x : 0.0; });
}
Tensor pointwise_add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "pointwise_add", [](double x, double y) { return x + y; });
}
Tensor pointwise_sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "pointwise_sub", [](double x, double y) { return x - y; });
}
Tensor pointwise_mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, "pointwise_mul", [](double x, double y) { return x * y; });
}
Tensor scale(const Tensor& a, double c) {
    return map(a, [c](double x) { return c * x; });
}
Tensor square(const Tensor& a) {
    return map(a, [](double x) { return x * x; });
}
Tensor axpy(const Tensor& a, double c, const Tensor& b) {
    return zip(a, b, "axpy", [c](double x, double y) { return x + c * y; });
}

double inner_product(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "inner_product");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const Tensor& a) {
    double acc = 0.0;
    for (double x : a.data()) acc += x;
    return acc;
}

double l2_norm(const Tensor& a) { return std::sqrt(inner_product(a, a)); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<int> argmax_channels(const Tensor& x) {
    require_rank(x, 3, "argmax_channels");
    const std::size_t N = x.channels(), P = x.plane();
    std::vector<int> idx(P, 0);
    for (std::size_t p = 0; p < P; ++p) {
        double best = x[p];
        for (std::size_t n = 1; n < N; ++n) {
            if (x[n * P + p] > best) {
                best = x[n * P + p];
                idx[p] = static_cast<int>(n);
            }
        }
    }
    return idx;
}

// --- layout -----------------------------------------------------------------

Tensor replicate_classes(const Tensor& features, std::size_t classes) {
    require_rank(features, 3, "replicate_classes");
    const std::size_t I = features.channels(), P = features.plane();
    Tensor out({classes * I, features.height(), features.width()});
    for (std::size_t n = 0; n < classes; ++n)
        std::copy(features.raw(), features.raw() + I * P, out.raw() + n * I * P);
    return out;
}

Tensor sum_class_copies(const Tensor& field, std::size_t classes) {
    require_rank(field, 3, "sum_class_copies");
    if (classes == 0 || field.channels() % classes != 0)
        throw std::invalid_argument("sum_class_copies: channel count not divisible by class count");
    const std::size_t I = field.channels() / classes, P = field.plane();
    Tensor out({I, field.height(), field.width()});
    for (std::size_t n = 0; n < classes; ++n)
        for (std::size_t k = 0; k < I * P; ++k) out[k] += field[n * I * P + k];
    return out;
}

Tensor expand_labels(const Tensor& labels, std::size_t features) {
    require_rank(labels, 3, "expand_labels");
    const std::size_t N = labels.channels(), P = labels.plane();
    Tensor out({N * features, labels.height(), labels.width()});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < features; ++i)
            std::copy(labels.raw() + n * P, labels.raw() + (n + 1) * P, out.raw() + (n * features + i) * P);
    return out;
}

Tensor reduce_groups(const Tensor& field, std::size_t classes) {
    require_rank(field, 3, "reduce_groups");
    if (classes == 0 || field.channels() % classes != 0)
        throw std::invalid_argument("reduce_groups: channel count " + std::to_string(field.channels()) +
                                    " not divisible by " + std::to_string(classes) + " classes");
    const std::size_t I = field.channels() / classes, P = field.plane();
    Tensor out({classes, field.height(), field.width()});
    for (std::size_t n = 0; n < classes; ++n)
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t p = 0; p < P; ++p) out[n * P + p] += field[(n * I + i) * P + p];
    return out;
}

Tensor channel_sums(const Tensor& x) {
    require_rank(x, 3, "channel_sums");
    Tensor out({x.channels()});
    for (std::size_t c = 0; c < x.channels(); ++c) {
        double s = 0.0;
        for (double e : x.channel(c)) s += e;
        out[c] = s;
    }
    return out;
}

Tensor renormalize_simplex(const Tensor& values) {
    require_rank(values, 3, "renormalize_simplex");
    const std::size_t N = values.channels(), P = values.plane();
    Tensor t(values.shape());
    for (std::size_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double v = std::clamp(values[n * P + p], 0.0, 1.0);
            t[n * P + p] = v;
            s += v;
        }
        if (s <= 0.0) {
            for (std::size_t n = 0; n < N; ++n) t[n * P + p] = 1.0 / static_cast<double>(N);
        } else {
            for (std::size_t n = 0; n < N; ++n) t[n * P + p] /= s;
        }
    }
    return t;
}

}  // namespace msseg
