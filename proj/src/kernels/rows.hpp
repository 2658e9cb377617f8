#pragma once

// Per-row bodies shared by the serial and OpenMP kernels. Keeping the
// arithmetic in one place is what makes the two variants bit-identical.

#include <cstddef>

#include "msseg/kernels.hpp"

namespace msseg::kernels::rows {

/// out_row (out_w values) = bias + sum_{c,a,b} w[o,c,a,b] * xp[c, i*s+a, j*s+b].
inline void conv_row(const double* xp, const double* w, double bias, double* out_row, std::size_t o, std::size_t i,
                     std::size_t channels, const ConvGeometry& g) {
    for (std::size_t j = 0; j < g.out_w; ++j) out_row[j] = bias;
    const std::size_t s = g.stride;
    for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = xp + c * g.padded_h * g.padded_w;
        const double* wc = w + ((o * channels + c) * g.kh) * g.kw;
        for (std::size_t a = 0; a < g.kh; ++a) {
            const double* xrow = xc + (i * s + a) * g.padded_w;
            for (std::size_t b = 0; b < g.kw; ++b) {
                const double wv = wc[a * g.kw + b];
                const double* src = xrow + b;
                if (s == 1) {
                    for (std::size_t j = 0; j < g.out_w; ++j) out_row[j] += wv * src[j];
                } else {
                    for (std::size_t j = 0; j < g.out_w; ++j) out_row[j] += wv * src[j * s];
                }
            }
        }
    }
}

/// Gather form of the transposed convolution for padded row r of channel c:
/// gp[c, r, q] = sum_{o,a,b} w[o,c,a,b] * y[o, (r-a)/s, (q-b)/s].
inline void transpose_row(const double* y, const double* w, double* gp_row, std::size_t c, std::size_t r,
                          std::size_t in_channels, std::size_t out_channels, const ConvGeometry& g) {
    for (std::size_t q = 0; q < g.padded_w; ++q) gp_row[q] = 0.0;
    const std::size_t s = g.stride;
    for (std::size_t o = 0; o < out_channels; ++o) {
        const double* yo = y + o * g.out_h * g.out_w;
        const double* wo = w + ((o * in_channels + c) * g.kh) * g.kw;
        for (std::size_t a = 0; a < g.kh; ++a) {
            if (r < a || (r - a) % s != 0) continue;
            const std::size_t i = (r - a) / s;
            if (i >= g.out_h) continue;
            const double* yrow = yo + i * g.out_w;
            for (std::size_t b = 0; b < g.kw; ++b) {
                const double wv = wo[a * g.kw + b];
                double* dst = gp_row + b;
                if (s == 1) {
                    for (std::size_t j = 0; j < g.out_w; ++j) dst[j] += wv * yrow[j];
                } else {
                    for (std::size_t j = 0; j < g.out_w; ++j) dst[j * s] += wv * yrow[j];
                }
            }
        }
    }
}

/// Fixed-order four-lane dot product (lets the compiler vectorise without
/// reassociating beyond what is written here).
inline double strided_dot(const double* a, const double* b, std::size_t n, std::size_t b_stride) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        l0 += a[j] * b[j * b_stride];
        l1 += a[j + 1] * b[(j + 1) * b_stride];
        l2 += a[j + 2] * b[(j + 2) * b_stride];
        l3 += a[j + 3] * b[(j + 3) * b_stride];
    }
    for (; j < n; ++j) l0 += a[j] * b[j * b_stride];
    return (l0 + l1) + (l2 + l3);
}

/// dW[o,c,:,:] = sum_{i,j} gy[o,i,j] * xp[c, i*s+a, j*s+b].
inline void weight_grad_block(const double* xp, const double* gy, double* dw, std::size_t o, std::size_t c,
                              const ConvGeometry& g) {
    const double* xc = xp + c * g.padded_h * g.padded_w;
    const double* go = gy + o * g.out_h * g.out_w;
    for (std::size_t a = 0; a < g.kh; ++a) {
        for (std::size_t b = 0; b < g.kw; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.out_h; ++i)
                acc += strided_dot(go + i * g.out_w, xc + (i * g.stride + a) * g.padded_w + b, g.out_w, g.stride);
            dw[a * g.kw + b] = acc;
        }
    }
}

/// One output row of a single-channel stride-1 correlation with kernel k.
inline void depthwise_row(const double* xpc, const double* k, double* out_row, std::size_t i,
                          const ConvGeometry& g) {
    for (std::size_t j = 0; j < g.out_w; ++j) out_row[j] = 0.0;
    for (std::size_t a = 0; a < g.kh; ++a) {
        const double* xrow = xpc + (i + a) * g.padded_w;
        for (std::size_t b = 0; b < g.kw; ++b) {
            const double kv = k[a * g.kw + b];
            const double* src = xrow + b;
            for (std::size_t j = 0; j < g.out_w; ++j) out_row[j] += kv * src[j];
        }
    }
}

}  // namespace msseg::kernels::rows
