#include "hcrnet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "hcrnet/error.hpp"

namespace hcr {

namespace {

class PgmReader {
public:
    PgmReader(std::vector<char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    std::size_t number() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            throw DataError(name_ + ": malformed PGM header");
        }
        std::size_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            v = v * 10 + static_cast<std::size_t>(bytes_[pos_++] - '0');
            if (v > (1u << 24)) throw DataError(name_ + ": PGM header value too large");
        }
        return v;
    }

    void skip_single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            throw DataError(name_ + ": malformed PGM header");
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char ch = bytes_[pos_];
            if (ch == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::vector<char> bytes_;
    std::string name_;
    std::size_t pos_ = 2;
};

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
        throw DataError(path.string() + ": not a PGM image (expected P5 or P2)");
    }
    const bool binary = bytes[1] == '5';
    PgmReader r(std::move(bytes), path.string());
    GrayImage img;
    img.width = r.number();
    img.height = r.number();
    const std::size_t maxval = r.number();
    if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 255) {
        throw DataError(path.string() + ": unsupported PGM dimensions or maxval");
    }
    const std::size_t count = img.width * img.height;
    img.pixels.resize(count);
    auto rescale = [&](std::size_t v) {
        if (v > maxval) throw DataError(path.string() + ": pixel exceeds maxval");
        return static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
    };
    if (binary) {
        r.skip_single_whitespace();
        if (r.bytes().size() - r.pos() < count) throw DataError(path.string() + ": truncated PGM data");
        for (std::size_t i = 0; i < count; ++i) {
            img.pixels[i] = rescale(static_cast<unsigned char>(r.bytes()[r.pos() + i]));
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) img.pixels[i] = rescale(r.number());
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw DataError("failed writing image " + path.string());
}

std::vector<float> resize_bilinear(const std::vector<float>& src, std::size_t src_h, std::size_t src_w,
                                   std::size_t dst_h, std::size_t dst_w) {
    if (src_h == dst_h && src_w == dst_w) return src;
    std::vector<float> dst(dst_h * dst_w);
    const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
    const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
    for (std::size_t y = 0; y < dst_h; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < dst_w; ++x) {
            const double fx =
                std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = (1 - wx) * src[y0 * src_w + x0] + wx * src[y0 * src_w + x1];
            const double bottom = (1 - wx) * src[y1 * src_w + x0] + wx * src[y1 * src_w + x1];
            dst[y * dst_w + x] = static_cast<float>((1 - wy) * top + wy * bottom);
        }
    }
    return dst;
}

GrayImage to_gray_image(const Tensor& image) {
    if (image.rank() != 3) throw ShapeError("to_gray_image expects [H,W,C]");
    GrayImage g;
    g.height = image.dim(0);
    g.width = image.dim(1);
    const std::size_t c = image.dim(2);
    g.pixels.resize(g.width * g.height);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
        const double v = std::clamp(static_cast<double>(image[i * c]), 0.0, 1.0);
        g.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return g;
}

}  // namespace hcr
