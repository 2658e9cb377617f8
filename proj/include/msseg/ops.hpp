#pragma once

#include <cstddef>
#include <optional>

#include "msseg/kernels.hpp"
#include "msseg/tensor.hpp"

namespace msseg {

/// Convolution weights (out x in x kh x kw) with optional per-output bias.
struct ConvKernel {
    Tensor weights;
    std::optional<Tensor> bias;

    ConvKernel() = default;
    explicit ConvKernel(Tensor w, std::optional<Tensor> b = std::nullopt);

    std::size_t out_channels() const { return weights.dim(0); }
    std::size_t in_channels() const { return weights.dim(1); }
    std::size_t kernel_h() const { return weights.dim(2); }
    std::size_t kernel_w() const { return weights.dim(3); }
    const Tensor* bias_ptr() const { return bias ? &*bias : nullptr; }
    std::size_t parameter_count() const { return weights.size() + (bias ? bias->size() : 0); }
};

// --- convolution ----------------------------------------------------------

/// Cross-correlation of a C x H x W input. Stride must be 1 or 2.
Tensor conv2d(const Tensor& input, const ConvKernel& kernel, std::size_t stride = 1,
              Padding padding = Padding::SameZero);

/// Linear adjoint of conv2d (bias ignored). `out_h`/`out_w` give the extent
/// of the forward input; by default stride times the input extent for same
/// padding and (n-1)*stride+k for valid padding.
Tensor transpose_conv2d(const Tensor& input, const ConvKernel& kernel, std::size_t stride = 1,
                        Padding padding = Padding::SameZero, std::size_t out_h = 0, std::size_t out_w = 0);

/// Gradient of conv2d with respect to its weights, given the forward input
/// and the gradient of the output.
Tensor conv2d_weight_grad(const Tensor& input, const Tensor& grad_out, std::size_t kh, std::size_t kw,
                          std::size_t stride = 1, Padding padding = Padding::SameZero);

/// Same-extent correlation of every channel with one 2D kernel.
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel2d, Padding padding);

// --- resampling -----------------------------------------------------------

/// Bilinear 2x upsampling, half-pixel (align-corners false) sample centres.
Tensor upsample_bilinear2x(const Tensor& input);
/// Adjoint of upsample_bilinear2x for a coarse extent h x w.
Tensor upsample_bilinear2x_adjoint(const Tensor& grad, std::size_t h, std::size_t w);

/// Crops or replicate-pads the bottom/right edge to exactly h x w.
Tensor fit_extent(const Tensor& input, std::size_t h, std::size_t w);
Tensor fit_extent_adjoint(const Tensor& grad, std::size_t h, std::size_t w);

/// Non-overlapping 2x2 mean; ragged edge cells average the pixels they have.
Tensor average_pool2x(const Tensor& input);
Tensor average_pool2x_adjoint(const Tensor& grad, std::size_t fine_h, std::size_t fine_w);

std::size_t coarse_extent(std::size_t n);

// --- pointwise ------------------------------------------------------------

/// Per-pixel softmax over channels, computed with max subtraction.
Tensor channel_softmax(const Tensor& logits);

Tensor relu(const Tensor& input);
Tensor pointwise_add(const Tensor& a, const Tensor& b);
Tensor pointwise_sub(const Tensor& a, const Tensor& b);
Tensor pointwise_mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor square(const Tensor& a);
/// a + c*b
Tensor axpy(const Tensor& a, double c, const Tensor& b);
double inner_product(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double l2_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Per-channel totals of a C x H x W tensor, as a length-C tensor.
Tensor channel_sums(const Tensor& x);

/// Clamps to [0, 1] and divides by the per-pixel channel sum; pixels whose
/// clamped sum is 0 become uniform.
Tensor renormalize_simplex(const Tensor& values);

/// Per-pixel index of the largest channel, ties to the lowest index.
std::vector<int> argmax_channels(const Tensor& x);

// --- feature/class channel layout ------------------------------------------
//
// A feature field has C = I*N channels; channel n*I + i carries feature i
// of class n.

/// I x H x W -> (N*I) x H x W by stacking N copies.
Tensor replicate_classes(const Tensor& features, std::size_t classes);
/// Adjoint of replicate_classes: sums the N copies of each feature.
Tensor sum_class_copies(const Tensor& field, std::size_t classes);
/// N x H x W -> (N*I) x H x W, channel n*I+i = v[n].
Tensor expand_labels(const Tensor& labels, std::size_t features);
/// (N*I) x H x W -> N x H x W, summing the I feature channels of each class.
Tensor reduce_groups(const Tensor& field, std::size_t classes);

}  // namespace msseg
