#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hcrnet/tensor.hpp"

namespace hcr {

// 8-bit single-channel raster, row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

// Binary (P5) or ASCII (P2) portable graymap; maxval up to 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// Bilinear resize in floating point, pixel centers aligned.
std::vector<float> resize_bilinear(const std::vector<float>& src, std::size_t src_h, std::size_t src_w,
                                   std::size_t dst_h, std::size_t dst_w);

// First channel of an [H,W,C] tensor in [0,1] quantized to 8 bits.
GrayImage to_gray_image(const Tensor& image);

}  // namespace hcr
