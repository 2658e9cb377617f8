#include "checks.hpp"
#include "rows.hpp"

namespace msseg::kernels::parallel {

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor* bias, std::size_t stride, Padding padding) {
    detail::check_conv_args(x, weights, bias);
    const auto g = conv_geometry(x.height(), x.width(), weights.dim(2), weights.dim(3), stride, padding);
    const Tensor xp = pad_input(x, g);
    const long O = static_cast<long>(weights.dim(0));
    const long H = static_cast<long>(g.out_h);
    const std::size_t C = x.channels();
    Tensor out({weights.dim(0), g.out_h, g.out_w});
#pragma omp parallel for collapse(2) schedule(static)
    for (long o = 0; o < O; ++o) {
        for (long i = 0; i < H; ++i) {
            const double b = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
            rows::conv_row(xp.raw(), weights.raw(), b, out.raw() + (o * H + i) * g.out_w, static_cast<std::size_t>(o),
                           static_cast<std::size_t>(i), C, g);
        }
    }
    return out;
}

Tensor transpose_conv2d(const Tensor& y, const Tensor& weights, std::size_t stride, Padding padding,
                        std::size_t out_h, std::size_t out_w) {
    const auto g = detail::transpose_geometry(y, weights, stride, padding, out_h, out_w);
    const std::size_t O = weights.dim(0), C = weights.dim(1);
    Tensor gp({C, g.padded_h, g.padded_w});
    const long Cl = static_cast<long>(C), R = static_cast<long>(g.padded_h);
#pragma omp parallel for collapse(2) schedule(static)
    for (long c = 0; c < Cl; ++c)
        for (long r = 0; r < R; ++r)
            rows::transpose_row(y.raw(), weights.raw(), gp.raw() + (c * R + r) * g.padded_w,
                                static_cast<std::size_t>(c), static_cast<std::size_t>(r), C, O, g);
    return fold_padding(gp, g);
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, std::size_t kh, std::size_t kw,
                          std::size_t stride, Padding padding) {
    const auto g = detail::weight_grad_geometry(x, grad_out, kh, kw, stride, padding);
    const Tensor xp = pad_input(x, g);
    const std::size_t O = grad_out.channels(), C = x.channels();
    Tensor dw({O, C, kh, kw});
    const long Ol = static_cast<long>(O), Cl = static_cast<long>(C);
#pragma omp parallel for collapse(2) schedule(static)
    for (long o = 0; o < Ol; ++o)
        for (long c = 0; c < Cl; ++c)
            rows::weight_grad_block(xp.raw(), grad_out.raw(), dw.raw() + (o * Cl + c) * kh * kw,
                                    static_cast<std::size_t>(o), static_cast<std::size_t>(c), g);
    return dw;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel2d, Padding padding) {
    const auto g = detail::depthwise_geometry(x, kernel2d, padding);
    const Tensor xp = pad_input(x, g);
    Tensor out({x.channels(), g.out_h, g.out_w});
    const long Cl = static_cast<long>(x.channels()), H = static_cast<long>(g.out_h);
#pragma omp parallel for collapse(2) schedule(static)
    for (long c = 0; c < Cl; ++c)
        for (long i = 0; i < H; ++i)
            rows::depthwise_row(xp.raw() + c * g.padded_h * g.padded_w, kernel2d.raw(),
                                out.raw() + (c * H + i) * g.out_w, static_cast<std::size_t>(i), g);
    return out;
}

}  // namespace msseg::kernels::parallel
