#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hcrnet/network.hpp"

namespace hcr {

/// Ordered named-tensor container.
///
/// On disk (all integers u32 little-endian):
///   "HCRW" | version=1 | entry count |
///   per entry: name length | UTF-8 name | ndim | dims... | float32 LE data
/// Convolution kernels are stored [kh, kw, Cin, Cout].
class WeightArchive {
public:
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<float> data;
    };

    static constexpr std::uint32_t kVersion = 1;

    // Throws FormatError on duplicate names or data/shape disagreement.
    void add(std::string name, Shape shape, std::vector<float> data);
    void add(std::string name, const Tensor& t) { add(std::move(name), t.shape(), {t.data().begin(), t.data().end()}); }

    const Entry* find(std::string_view name) const;
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t scalar_count() const;

    friend bool operator==(const WeightArchive&, const WeightArchive&);

private:
    std::vector<Entry> entries_;
};

std::vector<std::uint8_t> serialize_archive(const WeightArchive& a);
WeightArchive parse_archive(std::span<const std::uint8_t> bytes);

void write_archive(const WeightArchive& a, const std::filesystem::path& path);
WeightArchive read_archive(const std::filesystem::path& path);

/// Copies "<layer>.weight" / "<layer>.bias" for block1_conv1..block4_conv2
/// into the graph and resets it to phase1. Validates every entry first, so a
/// failed import leaves the graph untouched.
void init_from_pretrained(NetworkGraph& g, const WeightArchive& a);

// Every graph tensor, including BN moving statistics, in layer order.
WeightArchive save_checkpoint(const NetworkGraph& g);
// Requires an exact name/shape match with the graph; all-or-nothing.
void load_checkpoint(NetworkGraph& g, const WeightArchive& a);

// Class count encoded by a checkpoint's final dense bias.
std::size_t checkpoint_num_classes(const WeightArchive& a);

}  // namespace hcr
