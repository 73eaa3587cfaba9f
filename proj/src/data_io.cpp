#include "hcrnet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>

#include <json.hpp>

#include "hcrnet/image.hpp"
#include "hcrnet/random.hpp"

namespace hcr {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kSide = 32;
constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset, const fs::path& path) {
    if (offset + 4 > b.size()) throw FormatError(path.string() + ": truncated IDX header");
    return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
           (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

// Centers a h x w plane on the 32x32 canvas, or resamples it when larger.
std::vector<float> fit_to_canvas(const std::vector<float>& plane, std::size_t h, std::size_t w) {
    if (h > kSide || w > kSide) return resize_bilinear(plane, h, w, kSide, kSide);
    std::vector<float> canvas(kSide * kSide, 0.0f);
    const std::size_t top = (kSide - h) / 2, left = (kSide - w) / 2;
    for (std::size_t r = 0; r < h; ++r) {
        std::copy_n(plane.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                    canvas.begin() + static_cast<std::ptrdiff_t>((top + r) * kSide + left));
    }
    return canvas;
}

double border_mean(const std::vector<float>& plane, std::size_t h, std::size_t w) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (r == 0 || c == 0 || r + 1 == h || c + 1 == w) {
                sum += plane[r * w + c];
                ++n;
            }
        }
    }
    return sum / static_cast<double>(n);
}

void draw_line(std::vector<float>& canvas, long x0, long y0, long x1, long y1) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    for (;;) {
        if (x0 >= 0 && y0 >= 0 && x0 < static_cast<long>(kSide) && y0 < static_cast<long>(kSide)) {
            canvas[static_cast<std::size_t>(y0) * kSide + static_cast<std::size_t>(x0)] = 1.0f;
        }
        if (x0 == x1 && y0 == y1) break;
        const long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

LabeledDataset assemble(std::vector<std::pair<std::string, Tensor>> samples) {
    std::map<std::string, int> index;
    for (const auto& s : samples) index.emplace(s.first, 0);
    LabeledDataset d;
    for (auto& [name, idx] : index) {
        idx = static_cast<int>(d.class_names.size());
        d.class_names.push_back(name);
    }
    for (auto& s : samples) {
        d.labels.push_back(index.at(s.first));
        d.images.push_back(std::move(s.second));
    }
    return d;
}

}  // namespace

void LabeledDataset::validate() const {
    if (images.size() != labels.size()) throw DataError("dataset has mismatched image/label counts");
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (img.shape() != Shape{kSide, kSide, 3}) {
            throw DataError("sample " + std::to_string(i) + " has shape " + shape_str(img.shape()));
        }
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
            throw DataError("sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                            " outside the class list");
        }
        for (std::size_t p = 0; p < kSide * kSide; ++p) {
            const float v = img[p * 3];
            if (!(v >= 0.0f && v <= 1.0f) || img[p * 3 + 1] != v || img[p * 3 + 2] != v) {
                throw DataError("sample " + std::to_string(i) + " violates the [0,1] grayscale input contract");
            }
        }
    }
}

Tensor gray_to_input(std::span<const float> plane, std::size_t side) {
    if (plane.size() != side * side) throw ShapeError("gray plane size does not match side");
    Tensor t({side, side, 3});
    for (std::size_t i = 0; i < plane.size(); ++i) {
        const float v = std::clamp(plane[i], 0.0f, 1.0f);
        t[i * 3] = t[i * 3 + 1] = t[i * 3 + 2] = v;
    }
    return t;
}

std::vector<Tensor> load_idx_images(const fs::path& images_path) {
    const auto ib = read_bytes(images_path);
    if (const auto m = read_be32(ib, 0, images_path); m != kIdxImagesMagic) {
        throw FormatError(images_path.string() + ": bad IDX image magic " + hex32(m));
    }
    const std::size_t count = read_be32(ib, 4, images_path);
    const std::size_t rows = read_be32(ib, 8, images_path);
    const std::size_t cols = read_be32(ib, 12, images_path);
    if (rows == 0 || cols == 0) throw FormatError(images_path.string() + ": zero image dimension");
    if (ib.size() < 16 + count * rows * cols) throw FormatError(images_path.string() + ": truncated IDX image data");
    std::vector<Tensor> images;
    images.reserve(count);
    std::vector<float> plane(rows * cols);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char* px = ib.data() + 16 + i * rows * cols;
        for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = static_cast<float>(px[p]) / 255.0f;
        images.push_back(gray_to_input(fit_to_canvas(plane, rows, cols)));
    }
    return images;
}

std::vector<int> load_idx_labels(const fs::path& labels_path) {
    const auto lb = read_bytes(labels_path);
    if (const auto m = read_be32(lb, 0, labels_path); m != kIdxLabelsMagic) {
        throw FormatError(labels_path.string() + ": bad IDX label magic " + hex32(m));
    }
    const std::size_t count = read_be32(lb, 4, labels_path);
    if (lb.size() < 8 + count) throw FormatError(labels_path.string() + ": truncated IDX label data");
    return {lb.begin() + 8, lb.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

LabeledDataset load_idx(const fs::path& images_path, const fs::path& labels_path) {
    LabeledDataset d;
    d.images = load_idx_images(images_path);
    d.labels = load_idx_labels(labels_path);
    if (d.images.size() != d.labels.size()) {
        throw DataError("IDX count mismatch: " + std::to_string(d.images.size()) + " images vs " +
                        std::to_string(d.labels.size()) + " labels");
    }
    const int max_label = d.labels.empty() ? 1 : *std::max_element(d.labels.begin(), d.labels.end());
    for (int c = 0; c <= std::max(max_label, 1); ++c) d.class_names.push_back(std::to_string(c));
    return d;
}

LabeledDataset load_image_dir(const fs::path& root, const ImageDirOptions& options) {
    if (!fs::is_directory(root)) throw DataError("image root " + root.string() + " is not a directory");
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw DataError("image root " + root.string() + " has no class directories");

    LabeledDataset d;
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("class directory " + dir.string() + " is empty");
        const int label = static_cast<int>(d.class_names.size());
        d.class_names.push_back(dir.filename().string());
        for (const auto& f : files) {
            const GrayImage img = read_pgm(f);
            std::vector<float> plane(img.pixels.size());
            for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = static_cast<float>(img.pixels[p]) / 255.0f;
            if (options.auto_invert && border_mean(plane, img.height, img.width) > 0.5) {
                for (auto& v : plane) v = 1.0f - v;
            }
            d.images.push_back(gray_to_input(resize_bilinear(plane, img.height, img.width, kSide, kSide)));
            d.labels.push_back(label);
        }
    }
    return d;
}

StrokeSample parse_stroke_sample(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("stroke sample is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("label") || !doc["label"].is_string() || !doc.contains("strokes") ||
        !doc["strokes"].is_array()) {
        throw DataError("stroke sample needs a string \"label\" and a \"strokes\" array");
    }
    StrokeSample s;
    s.label = doc["label"].get<std::string>();
    for (const auto& stroke : doc["strokes"]) {
        if (!stroke.is_array() || stroke.empty()) throw DataError("each stroke needs at least one point");
        auto& pts = s.strokes.emplace_back();
        for (const auto& pt : stroke) {
            if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
                throw DataError("stroke points must be [x, y] number pairs");
            }
            const double x = pt[0].get<double>(), y = pt[1].get<double>();
            if (!std::isfinite(x) || !std::isfinite(y)) throw DataError("stroke coordinates must be finite");
            pts.push_back({x, y});
        }
    }
    return s;
}

Tensor rasterize_strokes(const StrokeSample& sample) {
    if (sample.strokes.empty()) throw DataError("stroke sample has no strokes");
    double minx = INFINITY, miny = INFINITY, maxx = -INFINITY, maxy = -INFINITY;
    for (const auto& stroke : sample.strokes) {
        if (stroke.empty()) throw DataError("stroke sample has an empty stroke");
        for (const auto& p : stroke) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("stroke coordinates must be finite");
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
    }
    // Pixel centers 2..29 form the 28x28 box.
    constexpr double kBoxOrigin = 2.0;
    constexpr double kBoxSpan = 27.0;
    const double w = maxx - minx, h = maxy - miny;
    const double extent = std::max(w, h);
    const double scale = extent > 0.0 ? kBoxSpan / extent : 0.0;
    const double ox = kBoxOrigin + (kBoxSpan - w * scale) / 2.0;
    const double oy = kBoxOrigin + (kBoxSpan - h * scale) / 2.0;
    auto to_pixel = [&](const StrokePoint& p) {
        return std::pair<long, long>{std::lround(ox + (p.x - minx) * scale), std::lround(oy + (p.y - miny) * scale)};
    };

    std::vector<float> canvas(kSide * kSide, 0.0f);
    for (const auto& stroke : sample.strokes) {
        auto [px, py] = to_pixel(stroke.front());
        draw_line(canvas, px, py, px, py);
        for (std::size_t i = 1; i < stroke.size(); ++i) {
            const auto [qx, qy] = to_pixel(stroke[i]);
            draw_line(canvas, px, py, qx, qy);
            px = qx;
            py = qy;
        }
    }
    return gray_to_input(canvas);
}

LabeledDataset load_stroke_dir(const fs::path& root) {
    if (!fs::is_directory(root)) throw DataError("stroke root " + root.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension();
        if (ext == ".json" || ext == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Tensor>> samples;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw DataError("cannot open " + f.string());
        try {
            if (f.extension() == ".jsonl") {
                std::string line;
                while (std::getline(in, line)) {
                    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                    auto s = parse_stroke_sample(line);
                    samples.emplace_back(s.label, rasterize_strokes(s));
                }
            } else {
                std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
                auto s = parse_stroke_sample(text);
                samples.emplace_back(s.label, rasterize_strokes(s));
            }
        } catch (const DataError& e) {
            throw DataError(f.string() + ": " + e.what());
        }
    }
    if (samples.empty()) throw DataError("no stroke samples under " + root.string());
    return assemble(std::move(samples));
}

Split split_indices(const LabeledDataset& d, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0,1)");
    std::vector<std::vector<std::size_t>> by_class(d.num_classes());
    for (std::size_t i = 0; i < d.size(); ++i) by_class.at(static_cast<std::size_t>(d.labels[i])).push_back(i);
    Split s;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        if (idx.size() < 2) {
            throw DataError("class \"" + d.class_names[c] + "\" has fewer than 2 samples; cannot split");
        }
        Rng rng(mix_seed(seed, c));
        rng.shuffle(idx.begin(), idx.end());
        const auto n = static_cast<long>(idx.size());
        const long n_train = std::clamp(std::lround(ratio * static_cast<double>(n)), 1L, n - 1);
        s.train.insert(s.train.end(), idx.begin(), idx.begin() + n_train);
        s.test.insert(s.test.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

LabeledDataset subset(const LabeledDataset& d, std::span<const std::size_t> indices) {
    LabeledDataset out;
    out.class_names = d.class_names;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        out.images.push_back(d.images.at(i));
        out.labels.push_back(d.labels.at(i));
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, double ratio, std::uint64_t seed) {
    const auto s = split_indices(d, ratio, seed);
    return {subset(d, s.train), subset(d, s.test)};
}

Tensor make_batch(const LabeledDataset& d, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("empty batch");
    constexpr std::size_t stride = kSide * kSide * 3;
    Tensor batch({indices.size(), kSide, kSide, 3});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& img = d.images.at(indices[b]);
        std::copy_n(img.raw(), stride, batch.raw() + b * stride);
    }
    return batch;
}

}  // namespace hcr
