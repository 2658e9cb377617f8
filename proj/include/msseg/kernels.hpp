#pragma once

// Low-level convolution kernels. Every kernel exists twice: a plain serial
// reference and an OpenMP version that distributes independent output rows
// across threads. Both accumulate each output element in the same order, so
// their results are bit-identical for any thread count.

#include <cstddef>

#include "msseg/tensor.hpp"

namespace msseg {

enum class Padding {
    SameZero,       ///< output extent ceil(n/stride), zero outside the image
    SameReplicate,  ///< output extent ceil(n/stride), nearest edge value outside
    Valid,          ///< no padding, output extent (n-k)/stride+1
};

namespace kernels {

struct ConvGeometry {
    std::size_t in_h = 0, in_w = 0;
    std::size_t out_h = 0, out_w = 0;
    std::size_t kh = 0, kw = 0;
    std::size_t stride = 1;
    // Padded-domain extents and the offset of the image inside it.
    std::size_t padded_h = 0, padded_w = 0;
    std::size_t pad_top = 0, pad_left = 0;
    Padding padding = Padding::SameZero;
};

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw, std::size_t stride,
                           Padding padding);

/// Materialises the padded input (C x padded_h x padded_w).
Tensor pad_input(const Tensor& x, const ConvGeometry& g);

/// Adjoint of pad_input: folds a padded-domain tensor back onto the image.
Tensor fold_padding(const Tensor& padded, const ConvGeometry& g);

namespace serial {

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor* bias, std::size_t stride, Padding padding);
Tensor transpose_conv2d(const Tensor& y, const Tensor& weights, std::size_t stride, Padding padding,
                        std::size_t out_h, std::size_t out_w);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, std::size_t kh, std::size_t kw,
                          std::size_t stride, Padding padding);
Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel2d, Padding padding);

}  // namespace serial

namespace parallel {

Tensor conv2d(const Tensor& x, const Tensor& weights, const Tensor* bias, std::size_t stride, Padding padding);
Tensor transpose_conv2d(const Tensor& y, const Tensor& weights, std::size_t stride, Padding padding,
                        std::size_t out_h, std::size_t out_w);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, std::size_t kh, std::size_t kw,
                          std::size_t stride, Padding padding);
Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel2d, Padding padding);

}  // namespace parallel

}  // namespace kernels
}  // namespace msseg
