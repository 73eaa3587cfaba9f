#include "hcrnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hcrnet/random.hpp"

namespace hcr {

void AugmentConfig::validate() const {
    if (rotation_deg < 0 || shift_frac < 0 || shear < 0 || zoom_frac < 0) {
        throw ConfigError("augmentation magnitudes must be non-negative");
    }
    if (zoom_frac >= 1.0) throw ConfigError("zoom deviation must be below 1");
}

bool AugmentConfig::is_zero() const noexcept {
    return rotation_deg == 0 && shift_frac == 0 && shear == 0 && zoom_frac == 0;
}

AffineTransform compose_affine(const AffineParams& p, std::size_t side) {
    const double c = (static_cast<double>(side) - 1.0) / 2.0;
    const double theta = p.rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    // R * Shear * Zoom
    const double a00 = cs * p.zoom_x;
    const double a01 = (cs * p.shear - sn) * p.zoom_y;
    const double a10 = sn * p.zoom_x;
    const double a11 = (sn * p.shear + cs) * p.zoom_y;
    AffineTransform t;
    t.m = {a00, a01, c - a00 * c - a01 * c - p.shift_x, a10, a11, c - a10 * c - a11 * c - p.shift_y};
    return t;
}

AffineParams sample_affine_params(const AugmentConfig& cfg, std::uint64_t seed, std::size_t side) {
    cfg.validate();
    Rng rng(seed);
    const double max_shift = cfg.shift_frac * static_cast<double>(side);
    AffineParams p;
    // Fixed draw order so each magnitude has a stable position in the stream.
    p.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    p.shift_x = rng.uniform(-max_shift, max_shift);
    p.shift_y = rng.uniform(-max_shift, max_shift);
    p.shear = rng.uniform(-cfg.shear, cfg.shear);
    p.zoom_x = rng.uniform(1.0 - cfg.zoom_frac, 1.0 + cfg.zoom_frac);
    p.zoom_y = rng.uniform(1.0 - cfg.zoom_frac, 1.0 + cfg.zoom_frac);
    return p;
}

AffineTransform sample_affine(const AugmentConfig& cfg, std::uint64_t seed, std::size_t side) {
    if (cfg.is_zero()) return AffineTransform::identity();
    return compose_affine(sample_affine_params(cfg, seed, side), side);
}

Tensor apply_affine(const Tensor& image, const AffineTransform& t) {
    if (image.rank() != 3) throw ShapeError("apply_affine expects [H,W,C], got " + shape_str(image.shape()));
    if (t.is_identity()) return image;
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    Tensor out(image.shape());
    auto pixel = [&](std::ptrdiff_t y, std::ptrdiff_t x, std::size_t ch) -> double {
        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return 0.0;
        return image[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * c + ch];
    };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto [sx, sy] = t.map(static_cast<double>(x), static_cast<double>(y));
            const double fx0 = std::floor(sx), fy0 = std::floor(sy);
            const double fx = sx - fx0, fy = sy - fy0;
            const auto x0 = static_cast<std::ptrdiff_t>(fx0), y0 = static_cast<std::ptrdiff_t>(fy0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = (1 - fy) * ((1 - fx) * pixel(y0, x0, ch) + fx * pixel(y0, x0 + 1, ch)) +
                                 fy * ((1 - fx) * pixel(y0 + 1, x0, ch) + fx * pixel(y0 + 1, x0 + 1, ch));
                out[(y * w + x) * c + ch] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

Tensor augment_batch(const Tensor& batch, const AugmentConfig& cfg, std::uint64_t epoch_seed) {
    if (batch.rank() != 4) throw ShapeError("augment_batch expects [N,H,W,C], got " + shape_str(batch.shape()));
    if (!cfg.enabled) return batch;
    cfg.validate();
    const std::size_t n = batch.dim(0);
    const Shape image_shape{batch.dim(1), batch.dim(2), batch.dim(3)};
    const std::size_t stride = shape_numel(image_shape);
    Tensor out(batch.shape());
    std::vector<float> buf(stride);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(batch.raw() + i * stride, stride, buf.begin());
        const Tensor img(image_shape, buf);
        const auto t = sample_affine(cfg, mix_seed(epoch_seed, i), batch.dim(1));
        const Tensor aug = apply_affine(img, t);
        std::copy_n(aug.raw(), stride, out.raw() + i * stride);
    }
    return out;
}

}  // namespace hcr
