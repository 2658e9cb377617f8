#include "msseg/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "msseg/ops.hpp"

namespace msseg {

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (height == 0 || width == 0) throw std::invalid_argument("mask extents must be positive");
    if (values_.size() != height * width) throw std::invalid_argument("mask data does not match its extent");
    for (auto v : values_)
        if (v > 1) throw std::invalid_argument("mask values must be 0 or 1");
}

BinaryMask BinaryMask::from_tensor(const Tensor& t) {
    std::size_t h, w;
    if (t.rank() == 2) {
        h = t.dim(0);
        w = t.dim(1);
    } else if (t.rank() == 3 && t.dim(0) == 1) {
        h = t.dim(1);
        w = t.dim(2);
    } else {
        throw std::invalid_argument("binary mask needs an H x W tensor, got " + shape_string(t.shape()));
    }
    std::vector<std::uint8_t> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (t[i] != 0.0 && t[i] != 1.0) throw std::invalid_argument("mask tensor is not binary");
        v[i] = t[i] == 1.0;
    }
    return BinaryMask(h, w, std::move(v));
}

BinaryMask BinaryMask::from_labels(const std::vector<int>& labels, std::size_t height, std::size_t width, int cls) {
    std::vector<std::uint8_t> v(labels.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = labels[i] == cls;
    return BinaryMask(height, width, std::move(v));
}

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (auto v : values_) n += v;
    return n;
}

namespace {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width())
        throw std::invalid_argument("mask extents differ: " + std::to_string(pred.height()) + "x" +
                                    std::to_string(pred.width()) + " vs " + std::to_string(gt.height()) + "x" +
                                    std::to_string(gt.width()));
    Confusion c;
    const auto& p = pred.values();
    const auto& g = gt.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] && g[i]) ++c.tp;
        else if (p[i]) ++c.fp;
        else if (g[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max() / 4;

// Squared distance from every pixel to the nearest pixel of `sites`:
// exact column distances, then an exhaustive minimum along each row.
std::vector<std::int64_t> squared_distance_map(const BinaryMask& sites) {
    const std::size_t H = sites.height(), W = sites.width();
    std::vector<std::int64_t> col(H * W, kFar);
    for (std::size_t x = 0; x < W; ++x) {
        std::int64_t last = -1;
        for (std::size_t y = 0; y < H; ++y) {
            if (sites(y, x)) last = static_cast<std::int64_t>(y);
            if (last >= 0) col[y * W + x] = static_cast<std::int64_t>(y) - last;
        }
        last = -1;
        for (std::size_t y = H; y-- > 0;) {
            if (sites(y, x)) last = static_cast<std::int64_t>(y);
            if (last >= 0) col[y * W + x] = std::min(col[y * W + x], last - static_cast<std::int64_t>(y));
        }
    }
    std::vector<std::int64_t> out(H * W, kFar);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            std::int64_t best = kFar;
            for (std::size_t s = 0; s < W; ++s) {
                const std::int64_t g = col[y * W + s];
                if (g == kFar) continue;
                const std::int64_t dx = static_cast<std::int64_t>(x) - static_cast<std::int64_t>(s);
                best = std::min(best, dx * dx + g * g);
            }
            out[y * W + x] = best;
        }
    }
    return out;
}

BinaryMask boundary_mask(const BinaryMask& m) {
    const std::size_t H = m.height(), W = m.width();
    std::vector<std::uint8_t> b(H * W, 0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            if (!m(y, x)) continue;
            const bool inside = y > 0 && x > 0 && y + 1 < H && x + 1 < W && m(y - 1, x) && m(y + 1, x) &&
                                m(y, x - 1) && m(y, x + 1);
            b[y * W + x] = !inside;
        }
    return BinaryMask(H, W, std::move(b));
}

}  // namespace

double accuracy(const BinaryMask& pred, const BinaryMask& gt) {
    const Confusion c = confusion(pred, gt);
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.tp + c.tn + c.fp + c.fn);
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
    const Confusion c = confusion(pred, gt);
    const std::size_t uni = c.tp + c.fp + c.fn;
    return uni == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(uni);
}

double dsc(const BinaryMask& pred, const BinaryMask& gt) {
    const Confusion c = confusion(pred, gt);
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const BinaryMask& m) {
    const BinaryMask b = boundary_mask(m);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t y = 0; y < b.height(); ++y)
        for (std::size_t x = 0; x < b.width(); ++x)
            if (b(y, x)) out.emplace_back(y, x);
    return out;
}

double asd(const BinaryMask& pred, const BinaryMask& gt) {
    confusion(pred, gt);  // extent check
    if (pred.count() == 0 || gt.count() == 0) throw std::invalid_argument("undefined surface distance: empty mask");
    const BinaryMask bp = boundary_mask(pred), bg = boundary_mask(gt);
    const auto to_g = squared_distance_map(bg);
    const auto to_p = squared_distance_map(bp);
    // two directed sums added once, so swapping the arguments is exact
    double forward = 0.0, backward = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < bp.size(); ++i)
        if (bp.values()[i]) {
            forward += std::sqrt(static_cast<double>(to_g[i]));
            ++n;
        }
    for (std::size_t i = 0; i < bg.size(); ++i)
        if (bg.values()[i]) {
            backward += std::sqrt(static_cast<double>(to_p[i]));
            ++n;
        }
    return (forward + backward) / static_cast<double>(n);
}

std::string metric_name(Metric m) {
    switch (m) {
    case Metric::Accuracy: return "Acc";
    case Metric::IoU: return "IoU";
    case Metric::DSC: return "DSC";
    case Metric::ASD: return "ASD";
    }
    return "?";
}

EvaluationReport evaluate(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t classes,
                          std::size_t height, std::size_t width) {
    if (classes == 0) throw std::invalid_argument("evaluation needs at least one class");
    if (pred.size() != height * width || gt.size() != height * width)
        throw std::invalid_argument("label maps do not match the stated extent");
    for (const auto* map : {&pred, &gt})
        for (int v : *map)
            if (v < 0 || static_cast<std::size_t>(v) >= classes)
                throw std::invalid_argument("label " + std::to_string(v) + " is outside 0.." +
                                            std::to_string(classes - 1));
    EvaluationReport r;
    for (std::size_t n = 0; n < classes; ++n) {
        const auto p = BinaryMask::from_labels(pred, height, width, static_cast<int>(n));
        const auto g = BinaryMask::from_labels(gt, height, width, static_cast<int>(n));
        ClassReport c;
        c.accuracy = accuracy(p, g);
        c.iou = iou(p, g);
        c.dsc = dsc(p, g);
        if (p.count() > 0 && g.count() > 0) {
            c.asd = asd(p, g);
            c.asd_defined = true;
            r.asd += c.asd;
            ++r.asd_classes;
        }
        r.accuracy += c.accuracy;
        r.iou += c.iou;
        r.dsc += c.dsc;
        r.classes.push_back(c);
    }
    const double N = static_cast<double>(classes);
    r.accuracy /= N;
    r.iou /= N;
    r.dsc /= N;
    r.asd = r.asd_classes ? r.asd / static_cast<double>(r.asd_classes) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

EvaluationReport evaluate(const Tensor& pred, const Tensor& gt) {
    require_rank(pred, 3, "evaluate prediction");
    require_same_shape(pred, gt, "evaluate");
    return evaluate(argmax_channels(pred), argmax_channels(gt), pred.channels(), pred.height(), pred.width());
}

double macro_average(Metric metric, const Tensor& pred, const Tensor& gt) {
    const EvaluationReport r = evaluate(pred, gt);
    switch (metric) {
    case Metric::Accuracy: return r.accuracy;
    case Metric::IoU: return r.iou;
    case Metric::DSC: return r.dsc;
    case Metric::ASD: return r.asd;
    }
    return 0.0;
}

}  // namespace msseg
