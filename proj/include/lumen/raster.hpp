// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lumen/math.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

inline constexpr int kTileSize = 16;

struct RasterSettings {
    /// Contributions below this alpha are skipped.
    Real alpha_min = Real(1.0 / 255.0);
    /// Per-splat alpha is clamped to this value.
    Real alpha_max = Real(0.99);
    /// Blending stops before transmittance would drop below this.
    Real transmittance_min = Real(1e-4);
    /// Added to the diagonal of every screen-space covariance (px^2).
    Real lowpass = Real(0.3);
    Real near_plane = Real(0.05);
    /// Worker threads; 0 picks the hardware concurrency.
    int threads = 0;
};

/// A splat after perspective projection.
struct ProjectedSplat {
    Vec2 mean2d = Vec2::Zero();
    /// Screen-space covariance J W Sigma W^T J^T, before the low-pass term.
    Mat2 cov2d = Mat2::Zero();
    /// Inverse of cov2d + lowpass * I, stored as (a, b, c) for [[a, b], [b, c]].
    Vec3 conic = Vec3::Zero();
    Real view_depth = 0;
    Real opacity = 0;
    /// Pixel half-extent of the region where alpha can reach alpha_min.
    Real radius = 0;
    /// Tile rectangle [min, max) covered by the splat.
    int tile_min_x = 0, tile_min_y = 0, tile_max_x = 0, tile_max_y = 0;
    /// Index of the splat in the scene.
    std::uint32_t source = 0;
};

/// Projects one splat; std::nullopt when it is behind the near plane, has a
/// degenerate footprint or misses the image.
std::optional<ProjectedSplat> project_gaussian(const Splat& splat, const Camera& camera,
                                               const RasterSettings& settings = {});

struct ProjectionGrad {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
};

/// Chains gradients w.r.t. mean2d and the conic (symmetric full-matrix
/// convention: grad_conic = (d/da, d/db_each_offdiag, d/dc)) back through the
/// projection and compute_cov3d.
ProjectionGrad project_gaussian_backward(const Splat& splat, const Camera& camera,
                                         const RasterSettings& settings, const Vec2& grad_mean2d,
                                         const Vec3& grad_conic);

/// Per-tile lists of projected splat indices in front-to-back order.
struct TileBins {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::uint32_t> offsets;  // tiles_x * tiles_y + 1
    std::vector<std::uint32_t> entries;
};

/// Global stable order by (view_depth, source index).
std::vector<std::uint32_t> depth_order(std::span<const ProjectedSplat> splats);

TileBins bin_splats(std::span<const ProjectedSplat> splats, int width, int height);

/// Multi-channel result of alpha blending; `image` is row-major
/// height x width x channels.
struct RasterResult {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<Real> image;
    std::vector<Real> alpha;
    std::vector<Real> final_transmittance;
    /// Per pixel: number of leading tile-list entries visited.
    std::vector<std::uint32_t> contributors;
    TileBins bins;
};

/// Front-to-back alpha blending of per-splat payloads (splats.size() x
/// channels, row-major) over a black background.
RasterResult rasterize_forward(std::span<const ProjectedSplat> splats, std::span<const Real> payload,
                               int channels, const Camera& camera,
                               const RasterSettings& settings = {});

struct RasterGrad {
    std::vector<Vec2> mean2d;
    std::vector<Vec3> conic;
    std::vector<Real> opacity;
    std::vector<Real> payload;

    void resize(std::size_t n, int channels);
    bool all_finite() const;
};

/// Exact reverse pass of rasterize_forward for dLoss/dimage = grad_image.
RasterGrad rasterize_backward(std::span<const ProjectedSplat> splats, std::span<const Real> payload,
                              const RasterResult& forward, std::span<const Real> grad_image,
                              const RasterSettings& settings = {});

/// Runs fn(i) for i in [0, n) on `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace lumen::inline LUMEN_ABI
