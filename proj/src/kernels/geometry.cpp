#include <stdexcept>
#include <string>

#include "msseg/kernels.hpp"

namespace msseg::kernels {

namespace {

std::size_t extent_out(std::size_t in, std::size_t k, std::size_t stride, Padding padding) {
    if (padding == Padding::Valid) {
        if (in < k)
            throw std::invalid_argument("valid convolution: input extent " + std::to_string(in) +
                                        " smaller than kernel " + std::to_string(k));
        return (in - k) / stride + 1;
    }
    return (in + stride - 1) / stride;
}

// Maps a padded coordinate to an image coordinate; -1 means "zero".
long source_index(std::size_t padded, std::size_t pad, std::size_t extent, Padding padding) {
    const long idx = static_cast<long>(padded) - static_cast<long>(pad);
    if (idx >= 0 && idx < static_cast<long>(extent)) return idx;
    if (padding == Padding::SameReplicate) return idx < 0 ? 0 : static_cast<long>(extent) - 1;
    return -1;
}

}  // namespace

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw, std::size_t stride,
                           Padding padding) {
    if (stride != 1 && stride != 2)
        throw std::invalid_argument("convolution stride must be 1 or 2, got " + std::to_string(stride));
    if (kh == 0 || kw == 0) throw std::invalid_argument("convolution kernel must be non-empty");
    if (padding != Padding::Valid && (kh % 2 == 0 || kw % 2 == 0))
        throw std::invalid_argument("same padding requires odd kernel extents");
    ConvGeometry g;
    g.in_h = in_h;
    g.in_w = in_w;
    g.kh = kh;
    g.kw = kw;
    g.stride = stride;
    g.padding = padding;
    g.out_h = extent_out(in_h, kh, stride, padding);
    g.out_w = extent_out(in_w, kw, stride, padding);
    g.pad_top = padding == Padding::Valid ? 0 : (kh - 1) / 2;
    g.pad_left = padding == Padding::Valid ? 0 : (kw - 1) / 2;
    g.padded_h = (g.out_h - 1) * stride + kh;
    g.padded_w = (g.out_w - 1) * stride + kw;
    return g;
}

Tensor pad_input(const Tensor& x, const ConvGeometry& g) {
    const std::size_t C = x.channels();
    Tensor out({C, g.padded_h, g.padded_w});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < g.padded_h; ++r) {
            const long sr = source_index(r, g.pad_top, g.in_h, g.padding);
            if (sr < 0) continue;
            for (std::size_t q = 0; q < g.padded_w; ++q) {
                const long sq = source_index(q, g.pad_left, g.in_w, g.padding);
                if (sq < 0) continue;
                out.at(c, r, q) = x.at(c, static_cast<std::size_t>(sr), static_cast<std::size_t>(sq));
            }
        }
    }
    return out;
}

Tensor fold_padding(const Tensor& padded, const ConvGeometry& g) {
    const std::size_t C = padded.channels();
    Tensor out({C, g.in_h, g.in_w});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < g.padded_h; ++r) {
            const long sr = source_index(r, g.pad_top, g.in_h, g.padding);
            if (sr < 0) continue;
            for (std::size_t q = 0; q < g.padded_w; ++q) {
                const long sq = source_index(q, g.pad_left, g.in_w, g.padding);
                if (sq < 0) continue;
                out.at(c, static_cast<std::size_t>(sr), static_cast<std::size_t>(sq)) += padded.at(c, r, q);
            }
        }
    }
    return out;
}

}  // namespace msseg::kernels
