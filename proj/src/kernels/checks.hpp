#pragma once

#include <stdexcept>
#include <string>

#include "msseg/kernels.hpp"

namespace msseg::kernels::detail {

inline void check_conv_args(const Tensor& x, const Tensor& w, const Tensor* bias) {
    require_rank(x, 3, "conv2d input");
    require_rank(w, 4, "conv2d weights");
    if (w.dim(1) != x.channels())
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(w.dim(1)) + " input channels, got " +
                                    std::to_string(x.channels()));
    if (bias && bias->size() != w.dim(0))
        throw std::invalid_argument("conv2d: bias length " + std::to_string(bias->size()) + " != out channels " +
                                    std::to_string(w.dim(0)));
}

inline ConvGeometry transpose_geometry(const Tensor& y, const Tensor& w, std::size_t stride, Padding padding,
                                       std::size_t out_h, std::size_t out_w) {
    require_rank(y, 3, "transpose_conv2d input");
    require_rank(w, 4, "transpose_conv2d weights");
    if (w.dim(0) != y.channels())
        throw std::invalid_argument("transpose_conv2d: kernel has " + std::to_string(w.dim(0)) +
                                    " output channels, input has " + std::to_string(y.channels()));
    auto g = conv_geometry(out_h, out_w, w.dim(2), w.dim(3), stride, padding);
    if (g.out_h != y.height() || g.out_w != y.width())
        throw std::invalid_argument("transpose_conv2d: target extent " + std::to_string(out_h) + "x" +
                                    std::to_string(out_w) + " is inconsistent with input " +
                                    shape_string(y.shape()));
    return g;
}

inline ConvGeometry weight_grad_geometry(const Tensor& x, const Tensor& gy, std::size_t kh, std::size_t kw,
                                         std::size_t stride, Padding padding) {
    require_rank(x, 3, "conv2d_weight_grad input");
    require_rank(gy, 3, "conv2d_weight_grad output gradient");
    auto g = conv_geometry(x.height(), x.width(), kh, kw, stride, padding);
    if (g.out_h != gy.height() || g.out_w != gy.width())
        throw std::invalid_argument("conv2d_weight_grad: gradient shape " + shape_string(gy.shape()) +
                                    " does not match forward output");
    return g;
}

inline ConvGeometry depthwise_geometry(const Tensor& x, const Tensor& k, Padding padding) {
    require_rank(x, 3, "depthwise_conv2d input");
    require_rank(k, 2, "depthwise_conv2d kernel");
    return conv_geometry(x.height(), x.width(), k.dim(0), k.dim(1), 1, padding);
}

}  // namespace msseg::kernels::detail
