#pragma once

// Binary tensor files, network weight files and portable graymap/pixmap
// images.
//
// Tensor file: "MSTN", version byte 1, rank (u32 LE), rank dims (u32 LE),
// then the row-major payload as f64 LE.
// Weights file: "MSNW", version byte 1, features, classes, grids (u32 LE),
// tail-relu flag byte, tensor count (u32 LE), then one tensor record per
// parameter in MsnetParams::tensors() order.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "msseg/tensor.hpp"

namespace msseg {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kTensorFileVersion = 1;
inline constexpr std::uint8_t kWeightsFileVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

/// PGM/PPM (P2, P3, P5, P6; maxval up to 255). RGB is converted to luma
/// 0.299 R + 0.587 G + 0.114 B; the result is 1 x H x W in [0, 1].
Tensor read_image(const std::filesystem::path& path);
/// Writes a 1 x H x W tensor as binary PGM, values clamped to [0, 1] and
/// rounded to 8 bits.
void write_image(const Tensor& image, const std::filesystem::path& path);

/// Class-index graymap -> one-hot N x H x W. Indices >= N are rejected.
Tensor read_mask(const std::filesystem::path& path, std::size_t classes);
/// One-hot (or soft) N x H x W -> per-pixel argmax written as an index PGM.
void write_mask(const Tensor& labels, const std::filesystem::path& path);

/// Index map (values 0..N-1, row-major H x W) -> one-hot N x H x W.
Tensor one_hot(const std::vector<int>& index, std::size_t classes, std::size_t height, std::size_t width);

}  // namespace msseg
