#include "checks.hpp"
#include "rows.hpp"

namespace msseg::kernels::serial {

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor* bias, std::size_t stride, Padding padding) {
    detail::check_conv_args(x, weights, bias);
    const auto g = conv_geometry(x.height(), x.width(), weights.dim(2), weights.dim(3), stride, padding);
    const Tensor xp = pad_input(x, g);
    const std::size_t O = weights.dim(0), C = x.channels();
    Tensor out({O, g.out_h, g.out_w});
    for (std::size_t o = 0; o < O; ++o) {
        const double b = bias ? (*bias)[o] : 0.0;
        for (std::size_t i = 0; i < g.out_h; ++i)
            rows::conv_row(xp.raw(), weights.raw(), b, out.raw() + (o * g.out_h + i) * g.out_w, o, i, C, g);
    }
    return out;
}

Tensor transpose_conv2d(const Tensor& y, const Tensor& weights, std::size_t stride, Padding padding,
                        std::size_t out_h, std::size_t out_w) {
    const auto g = detail::transpose_geometry(y, weights, stride, padding, out_h, out_w);
    const std::size_t O = weights.dim(0), C = weights.dim(1);
    Tensor gp({C, g.padded_h, g.padded_w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < g.padded_h; ++r)
            rows::transpose_row(y.raw(), weights.raw(), gp.raw() + (c * g.padded_h + r) * g.padded_w, c, r, C, O, g);
    return fold_padding(gp, g);
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, std::size_t kh, std::size_t kw,
                          std::size_t stride, Padding padding) {
    const auto g = detail::weight_grad_geometry(x, grad_out, kh, kw, stride, padding);
    const Tensor xp = pad_input(x, g);
    const std::size_t O = grad_out.channels(), C = x.channels();
    Tensor dw({O, C, kh, kw});
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t c = 0; c < C; ++c)
            rows::weight_grad_block(xp.raw(), grad_out.raw(), dw.raw() + (o * C + c) * kh * kw, o, c, g);
    return dw;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel2d, Padding padding) {
    const auto g = detail::depthwise_geometry(x, kernel2d, padding);
    const Tensor xp = pad_input(x, g);
    const std::size_t C = x.channels();
    Tensor out({C, g.out_h, g.out_w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < g.out_h; ++i)
            rows::depthwise_row(xp.raw() + c * g.padded_h * g.padded_w, kernel2d.raw(),
                                out.raw() + (c * g.out_h + i) * g.out_w, i, g);
    return out;
}

}  // namespace msseg::kernels::serial
