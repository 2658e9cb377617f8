#include <fstream>

#include "msseg/io.hpp"
#include "msseg/msnet.hpp"

namespace msseg {

namespace {

constexpr char kWeightsMagic[4] = {'M', 'S', 'N', 'W'};

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.put(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw FormatError("truncated weights header");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_params(const MsnetParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const auto refs = params.tensors();
    out.write(kWeightsMagic, 4);
    out.put(static_cast<char>(kWeightsFileVersion));
    put_u32(out, static_cast<std::uint32_t>(params.hyper.features));
    put_u32(out, static_cast<std::uint32_t>(params.hyper.classes));
    put_u32(out, static_cast<std::uint32_t>(params.hyper.grids));
    out.put(params.hyper.tail_relu ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(refs.size()));
    for (const auto& r : refs) write_tensor(out, *r.tensor);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

MsnetParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || !std::equal(magic, magic + 4, kWeightsMagic))
        throw FormatError("bad weights magic in " + path.string() + " (expected MSNW)");
    const int version = in.get();
    if (version == EOF) throw FormatError("truncated weights header");
    if (version != kWeightsFileVersion)
        throw FormatError("unsupported weights file version " + std::to_string(version) + " (expected " +
                          std::to_string(kWeightsFileVersion) + ")");
    MsnetHyper hyper;
    hyper.features = get_u32(in);
    hyper.classes = get_u32(in);
    hyper.grids = get_u32(in);
    const int relu = in.get();
    if (relu != 0 && relu != 1) throw FormatError("bad tail flag in weights header");
    hyper.tail_relu = relu == 1;
    if (hyper.features == 0 || hyper.classes == 0 || hyper.grids == 0 || hyper.grids > 32 ||
        hyper.channels() > 4096)
        throw FormatError("implausible network shape in weights header");

    // Shapes come from a fresh initialisation; the file must match them.
    MsnetParams params = init_params(0, hyper);
    auto refs = params.tensors();
    const std::uint32_t count = get_u32(in);
    if (count != refs.size())
        throw FormatError("weights file holds " + std::to_string(count) + " tensors, expected " +
                          std::to_string(refs.size()));
    for (auto& r : refs) {
        Tensor t = read_tensor(in);
        if (!t.same_shape(*r.tensor))
            throw FormatError("tensor " + r.name + " has shape " + shape_string(t.shape()) + ", expected " +
                              shape_string(r.tensor->shape()));
        *r.tensor = std::move(t);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after weights in " + path.string());
    return params;
}

}  // namespace msseg
