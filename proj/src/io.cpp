#include "msseg/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "msseg/ops.hpp"

namespace msseg {

namespace {

constexpr char kTensorMagic[4] = {'M', 'S', 'T', 'N'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw FormatError(std::string("truncated tensor data while reading ") + what);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kTensorMagic, 4);
    out.put(static_cast<char>(kTensorFileVersion));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
        out.write(b, 8);
    }
}

Tensor read_tensor(std::istream& in) {
    char magic[4];
    read_exact(in, magic, 4, "magic");
    if (!std::equal(magic, magic + 4, kTensorMagic)) throw FormatError("bad tensor magic (expected MSTN)");
    char version = 0;
    read_exact(in, &version, 1, "version");
    if (static_cast<std::uint8_t>(version) != kTensorFileVersion)
        throw FormatError("unsupported tensor file version " + std::to_string(static_cast<unsigned char>(version)) +
                          " (expected " + std::to_string(kTensorFileVersion) + ")");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank < 1 || rank > 4) throw FormatError("tensor rank " + std::to_string(rank) + " outside 1..4");
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& d : shape) {
        d = get_u32(in, "dims");
        if (d == 0) throw FormatError("tensor extent 0");
        volume *= d;
        if (volume > (std::size_t{1} << 32)) throw FormatError("tensor too large");
    }
    std::vector<double> data(volume);
    std::vector<unsigned char> buf(volume * 8);
    read_exact(in, reinterpret_cast<char*>(buf.data()), buf.size(), "payload");
    for (std::size_t i = 0; i < volume; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[8 * i + k]) << (8 * k);
        data[i] = std::bit_cast<double>(bits);
    }
    return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    std::ostringstream out(std::ios::binary);
    write_tensor(out, t);
    const std::string s = out.str();
    return {s.begin(), s.end()};
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    std::istringstream in(std::string(bytes.begin(), bytes.end()), std::ios::binary);
    Tensor t = read_tensor(in);
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after tensor data");
    return t;
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_tensor(out, t);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    auto in = open_in(path);
    Tensor t = read_tensor(in);
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("trailing bytes after tensor data in " + path.string());
    return t;
}

// --- images -----------------------------------------------------------------

namespace {

struct RawImage {
    std::size_t width = 0, height = 0, channels = 1;
    unsigned maxval = 255;
    std::vector<unsigned> samples;
};

std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

unsigned parse_uint(const std::string& tok, const std::filesystem::path& path) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw FormatError("malformed header field '" + tok + "' in " + path.string());
    return static_cast<unsigned>(std::stoul(tok));
}

RawImage read_raw(const std::filesystem::path& path) {
    auto in = open_in(path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || (magic[1] != '2' && magic[1] != '3' && magic[1] != '5' && magic[1] != '6'))
        throw FormatError("unsupported image format in " + path.string() + " (expected PGM or PPM)");
    RawImage img;
    img.channels = (magic[1] == '3' || magic[1] == '6') ? 3 : 1;
    const bool binary = magic[1] == '5' || magic[1] == '6';
    img.width = parse_uint(next_token(in), path);
    img.height = parse_uint(next_token(in), path);
    img.maxval = parse_uint(next_token(in), path);
    if (img.width == 0 || img.height == 0) throw FormatError("empty image " + path.string());
    if (img.maxval == 0 || img.maxval > 255) throw FormatError("only 8-bit images are supported: " + path.string());
    const std::size_t n = img.width * img.height * img.channels;
    img.samples.resize(n);
    if (binary) {
        std::vector<unsigned char> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("truncated pixel data in " + path.string());
        std::copy(buf.begin(), buf.end(), img.samples.begin());
    } else {
        for (auto& s : img.samples) {
            const std::string tok = next_token(in);
            if (tok.empty()) throw FormatError("truncated pixel data in " + path.string());
            s = parse_uint(tok, path);
        }
    }
    for (unsigned s : img.samples)
        if (s > img.maxval) throw FormatError("sample exceeds maxval in " + path.string());
    return img;
}

void write_pgm(const std::vector<unsigned char>& pixels, std::size_t h, std::size_t w,
               const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "P5\n" << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
    const RawImage img = read_raw(path);
    const std::size_t P = img.width * img.height;
    Tensor t({1, img.height, img.width});
    const double m = static_cast<double>(img.maxval);
    for (std::size_t p = 0; p < P; ++p) {
        if (img.channels == 1) {
            t[p] = img.samples[p] / m;
        } else {
            const unsigned* s = &img.samples[3 * p];
            t[p] = (0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2]) / m;
        }
    }
    return t;
}

void write_image(const Tensor& image, const std::filesystem::path& path) {
    require_rank(image, 3, "write_image");
    if (image.channels() != 1) throw std::invalid_argument("write_image expects a single-channel image");
    std::vector<unsigned char> px(image.plane());
    for (std::size_t p = 0; p < px.size(); ++p)
        px[p] = static_cast<unsigned char>(std::lround(std::clamp(image[p], 0.0, 1.0) * 255.0));
    write_pgm(px, image.height(), image.width(), path);
}

Tensor one_hot(const std::vector<int>& index, std::size_t classes, std::size_t height, std::size_t width) {
    if (index.size() != height * width) throw std::invalid_argument("index map size does not match extent");
    Tensor t({classes, height, width});
    const std::size_t P = height * width;
    for (std::size_t p = 0; p < P; ++p) {
        if (index[p] < 0 || static_cast<std::size_t>(index[p]) >= classes)
            throw std::invalid_argument("class index " + std::to_string(index[p]) + " outside 0.." +
                                        std::to_string(classes - 1));
        t[static_cast<std::size_t>(index[p]) * P + p] = 1.0;
    }
    return t;
}

Tensor read_mask(const std::filesystem::path& path, std::size_t classes) {
    if (classes == 0) throw std::invalid_argument("mask needs at least one class");
    const RawImage img = read_raw(path);
    if (img.channels != 1) throw FormatError("mask must be a graymap: " + path.string());
    std::vector<int> index(img.samples.begin(), img.samples.end());
    for (int v : index)
        if (static_cast<std::size_t>(v) >= classes)
            throw FormatError("mask " + path.string() + " contains class index " + std::to_string(v) + " but only " +
                              std::to_string(classes) + " classes are configured");
    return one_hot(index, classes, img.height, img.width);
}

void write_mask(const Tensor& labels, const std::filesystem::path& path) {
    require_rank(labels, 3, "write_mask");
    if (labels.channels() > 256) throw std::invalid_argument("write_mask supports at most 256 classes");
    const auto idx = argmax_channels(labels);
    std::vector<unsigned char> px(idx.begin(), idx.end());
    write_pgm(px, labels.height(), labels.width(), path);
}

}  // namespace msseg
