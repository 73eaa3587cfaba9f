#include "hcrnet/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

namespace hcr {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'R', 'W'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
        pos_ += 4;
        return v;
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("weight archive truncated while reading ") + what);
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::string expect_shape_msg(const std::string& name, const Shape& want, const Shape& got) {
    return name + ": expected shape " + shape_str(want) + ", archive has " + shape_str(got);
}

}  // namespace

void WeightArchive::add(std::string name, Shape shape, std::vector<float> data) {
    if (find(name)) throw FormatError("duplicate archive entry " + name);
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != data.size()) {
        throw FormatError("archive entry " + name + ": shape " + shape_str(shape) + " holds " + std::to_string(n) +
                          " values, got " + std::to_string(data.size()));
    }
    entries_.push_back({std::move(name), std::move(shape), std::move(data)});
}

const WeightArchive::Entry* WeightArchive::find(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::size_t WeightArchive::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.data.size();
    return n;
}

bool operator==(const WeightArchive& a, const WeightArchive& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        const auto& x = a.entries_[i];
        const auto& y = b.entries_[i];
        if (x.name != y.name || x.shape != y.shape || x.data.size() != y.data.size()) return false;
        if (std::memcmp(x.data.data(), y.data.data(), x.data.size() * sizeof(float)) != 0) return false;
    }
    return true;
}

std::vector<std::uint8_t> serialize_archive(const WeightArchive& a) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, WeightArchive::kVersion);
    put_u32(out, static_cast<std::uint32_t>(a.size()));
    for (const auto& e : a.entries()) {
        put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) put_u32(out, static_cast<std::uint32_t>(d));
        out.reserve(out.size() + 4 * e.data.size());
        for (float f : e.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

WeightArchive parse_archive(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("not a weight archive (bad magic)");
    const auto version = r.u32("version");
    if (version != WeightArchive::kVersion) {
        throw FormatError("unsupported weight archive version " + std::to_string(version));
    }
    const auto count = r.u32("entry count");
    WeightArchive a;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.u32("name length");
        const auto name_bytes = r.take(name_len, "name");
        std::string name(name_bytes.begin(), name_bytes.end());
        const auto ndim = r.u32("ndim");
        if (ndim > 8) throw FormatError("archive entry " + name + " has implausible rank " + std::to_string(ndim));
        Shape shape(ndim);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = r.u32("dims");
            n *= d;
            if (n > r.remaining() / 4 + 1) throw FormatError("archive entry " + name + ": shape exceeds file size");
        }
        const auto raw = r.take(n * 4, "tensor data");
        std::vector<float> data(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::uint32_t v = 0;
            for (std::size_t b = 0; b < 4; ++b) v |= std::uint32_t{raw[4 * k + b]} << (8 * b);
            data[k] = std::bit_cast<float>(v);
        }
        a.add(std::move(name), std::move(shape), std::move(data));
    }
    if (r.remaining() != 0) throw FormatError("weight archive has trailing bytes");
    return a;
}

void write_archive(const WeightArchive& a, const std::filesystem::path& path) {
    const auto bytes = serialize_archive(a);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

WeightArchive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_archive(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void init_from_pretrained(NetworkGraph& g, const WeightArchive& a) {
    struct Install {
        Tensor* target;
        const WeightArchive::Entry* source;
    };
    std::vector<Install> plan;
    for (const auto& layer_name : backbone_layer_names()) {
        auto& params = g.layer(layer_name).params;
        for (auto [suffix, target] : {std::pair{".weight", &*params.weights}, std::pair{".bias", &*params.bias}}) {
            const std::string name = layer_name + suffix;
            const auto* e = a.find(name);
            if (!e) throw DataError("pretrained archive is missing " + name);
            if (e->shape != target->shape()) throw ShapeError(expect_shape_msg(name, target->shape(), e->shape));
            plan.push_back({target, e});
        }
    }
    for (const auto& p : plan) std::copy(p.source->data.begin(), p.source->data.end(), p.target->raw());
    set_phase(g, Phase::phase1);
}

WeightArchive save_checkpoint(const NetworkGraph& g) {
    WeightArchive a;
    for (const auto& [name, t] : all_tensors(g)) a.add(name, *t);
    return a;
}

void load_checkpoint(NetworkGraph& g, const WeightArchive& a) {
    auto tensors = all_tensors(g);
    std::unordered_set<std::string> known;
    for (const auto& [name, t] : tensors) {
        const auto* e = a.find(name);
        if (!e) throw DataError("checkpoint is missing " + name);
        if (e->shape != t->shape()) throw ShapeError("checkpoint " + expect_shape_msg(name, t->shape(), e->shape));
        known.insert(name);
    }
    for (const auto& e : a.entries()) {
        if (!known.contains(e.name)) throw DataError("checkpoint entry " + e.name + " does not exist in the graph");
    }
    for (auto& [name, t] : tensors) {
        const auto* e = a.find(name);
        std::copy(e->data.begin(), e->data.end(), t->raw());
    }
    for (auto& l : g.layers) {
        if (l.params.kind == LayerKind::batchnorm) l.params.statistics_seeded = true;
    }
}

std::size_t checkpoint_num_classes(const WeightArchive& a) {
    const auto* e = a.find("dense_2.bias");
    if (!e || e->shape.size() != 1) throw DataError("checkpoint has no dense_2.bias entry");
    return e->shape[0];
}

}  // namespace hcr
