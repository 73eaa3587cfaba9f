#pragma once

#include <array>
#include <cstdint>

#include "hcrnet/tensor.hpp"

namespace hcr {

// Maximum magnitudes of the random affine perturbation. Shifts are a
// fraction of the image side, zoom is the deviation from 1.
struct AugmentConfig {
    double rotation_deg = 10.0;
    double shift_frac = 0.05;
    double shear = 0.05;
    double zoom_frac = 0.05;
    bool enabled = false;

    void validate() const;
    bool is_zero() const noexcept;
};

/// Inverse map: (source_x, source_y) = M * (x, y, 1) for output pixel (x, y),
/// x = column, y = row.
struct AffineTransform {
    std::array<double, 6> m{1, 0, 0, 0, 1, 0};

    static AffineTransform identity() { return {}; }
    std::array<double, 2> map(double x, double y) const {
        return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]};
    }
    bool is_identity() const noexcept { return m == identity().m; }
};

/// The explicit parameters of one transform, composed about the image center
/// c as  source = c + R(angle) * Shear(shear) * diag(zoom_x, zoom_y) * (p - c) - shift.
struct AffineParams {
    double rotation_deg = 0.0;
    double shift_x = 0.0;  // pixels; positive moves content right
    double shift_y = 0.0;  // pixels; positive moves content down
    double shear = 0.0;    // source_x += shear * (y - cy)
    double zoom_x = 1.0;
    double zoom_y = 1.0;
};

AffineTransform compose_affine(const AffineParams& params, std::size_t side = 32);

// Draws rotation, shifts, shear and per-axis zoom uniformly within `cfg`.
AffineParams sample_affine_params(const AugmentConfig& cfg, std::uint64_t seed, std::size_t side = 32);
AffineTransform sample_affine(const AugmentConfig& cfg, std::uint64_t seed, std::size_t side = 32);

/// Bilinear resampling of an [H,W,C] image through `t`. Samples outside the
/// source read as 0 and the result is clamped to [0,1].
Tensor apply_affine(const Tensor& image, const AffineTransform& t);

/// Augments every image of an [N,H,W,C] batch with its own transform seeded
/// by (epoch_seed, index). A disabled config returns the batch unchanged.
Tensor augment_batch(const Tensor& batch, const AugmentConfig& cfg, std::uint64_t epoch_seed);

}  // namespace hcr
