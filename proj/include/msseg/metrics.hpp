#pragma once

// Overlap and surface-distance metrics on binary masks, plus per-class
// one-vs-rest evaluation of label maps.
//
// Conventions: IoU and DSC of two empty masks are 1. A mask pixel is on the
// boundary when one of its four neighbours lies outside the mask (outside
// the image counts). Surface distances are Euclidean between pixel centres.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "msseg/tensor.hpp"

namespace msseg {

class BinaryMask {
public:
    BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> values);
    /// H x W or 1 x H x W tensor with entries in {0, 1}.
    static BinaryMask from_tensor(const Tensor& t);
    /// Pixels of `labels` equal to `cls`.
    static BinaryMask from_labels(const std::vector<int>& labels, std::size_t height, std::size_t width, int cls);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    bool operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x] != 0; }
    const std::vector<std::uint8_t>& values() const { return values_; }
    std::size_t count() const;

private:
    std::size_t height_, width_;
    std::vector<std::uint8_t> values_;
};

double accuracy(const BinaryMask& pred, const BinaryMask& gt);
double iou(const BinaryMask& pred, const BinaryMask& gt);
double dsc(const BinaryMask& pred, const BinaryMask& gt);
/// Symmetric average surface distance; throws for an empty mask.
double asd(const BinaryMask& pred, const BinaryMask& gt);

/// Boundary pixels as (row, col) in row-major order.
std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const BinaryMask& m);

enum class Metric { Accuracy, IoU, DSC, ASD };
std::string metric_name(Metric m);

struct ClassReport {
    double accuracy = 0.0, iou = 0.0, dsc = 0.0;
    double asd = 0.0;
    bool asd_defined = false;  ///< false when either mask of the class is empty
};

struct EvaluationReport {
    std::vector<ClassReport> classes;
    double accuracy = 0.0, iou = 0.0, dsc = 0.0;
    double asd = 0.0;
    std::size_t asd_classes = 0;  ///< classes contributing to the ASD mean
};

/// Per-class one-vs-rest metrics and their arithmetic means. ASD is
/// averaged over classes where both masks are nonempty.
EvaluationReport evaluate(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t classes,
                          std::size_t height, std::size_t width);
/// Same for N x H x W label tensors (argmaxed, ties to the lowest class).
EvaluationReport evaluate(const Tensor& pred, const Tensor& gt);

double macro_average(Metric metric, const Tensor& pred, const Tensor& gt);

}  // namespace msseg
