// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lumen/neural.hpp"
#include "lumen/raster.hpp"
#include "lumen/scene.hpp"
#include "lumen/shading.hpp"

namespace lumen::inline LUMEN_ABI {

// Payload channel layout of the splat pipeline.
inline constexpr int kChanRgb = 0;
inline constexpr int kChanDepth = 3;
inline constexpr int kChanNormal = 4;
inline constexpr int kBaseChannels = 7;
inline constexpr int kChanAlbedo = 7;
inline constexpr int kChanDiffuse = 10;
inline constexpr int kChanSpecular = 13;
inline constexpr int kDecompChannels = 16;

struct RenderOptions {
    RasterSettings raster;
    /// Also blend albedo / diffuse / specular buffers.
    bool decomposition = false;
    /// false renders the classic Lambertian diffuse (multiplier fixed at 1).
    bool use_mlp = true;
    /// Standard deviation of the training-time input noise; 0 disables it.
    Real noise_sigma = 0;
    std::uint64_t noise_seed = 0;
    /// Spotlight axis in the camera frame; defaults to the camera forward axis.
    std::optional<Vec3> light_forward;
};

/// Buffers for one view. Images are row-major; rgb, normal and aux buffers
/// have three channels per pixel.
struct RenderOutput {
    int width = 0;
    int height = 0;
    std::vector<Real> rgb;
    std::vector<Real> depth;
    std::vector<Real> normal;  // camera frame, renormalized per pixel
    std::vector<Real> alpha;
    std::vector<Real> albedo;
    std::vector<Real> diffuse;
    std::vector<Real> specular;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    /// Named buffer lookup: rgb, albedo, diffuse, specular, normal, depth, alpha.
    const std::vector<Real>& buffer(const std::string& name) const;
};

/// Per-visible-splat quantities kept for the reverse pass.
struct SplatShadingState {
    std::uint32_t source = 0;
    Vec3 cam_pos;
    Vec3 to_light;
    Real normal_sign = 1;
    ShadingInputs inputs;
    NoiseSample noise;
    Real multiplier = 1;
};

struct ViewCache {
    std::vector<ProjectedSplat> projected;
    std::vector<SplatShadingState> states;
    std::vector<Real> payload;
    int channels = 0;
    RasterResult raster;
    MlpCache mlp;
    Vec3 light_world = Vec3::Zero();
    std::vector<Real> hash_features;
    LightRig light;
};

/// Gradients w.r.t. every learnable quantity of a scene. Light gradients are
/// taken w.r.t. the constrained LightRig values.
struct SceneGradients {
    std::vector<Vec3> position;
    std::vector<Vec4> rotation;
    std::vector<Vec3> log_scale;
    std::vector<Real> opacity_logit;
    std::vector<Vec3> albedo_logit;
    std::vector<Real> roughness_logit;
    std::vector<Real> f0_logit;
    /// Screen-space mean gradient magnitude, used for densification.
    std::vector<Real> mean2d_norm;

    Vec3 light_offset = Vec3::Zero();
    Vec3 light_intensity = Vec3::Zero();
    Vec3 light_atten = Vec3::Zero();
    Real spot_inner = 0;
    Real spot_outer = 0;

    MlpGrads mlp;
    std::vector<Real> hash_table;

    static SceneGradients zeros_like(const SceneModel& scene);
    bool all_finite() const;
};

/// Upstream gradients for render_backward. Empty vectors mean zero.
struct OutputGrads {
    std::vector<Real> rgb;
    std::vector<Real> depth;
    std::vector<Real> normal;  // w.r.t. the renormalized normal buffer
    /// Per visible splat, indexed like ViewCache::states.
    std::vector<Real> multiplier;
};

RenderOutput render_view(const SceneModel& scene, const Camera& camera,
                         const RenderOptions& options = {}, ViewCache* cache = nullptr);

/// Renders with an explicit light rig in place of scene.light.
RenderOutput render_view(const SceneModel& scene, const LightRig& light, const Camera& camera,
                         const RenderOptions& options, ViewCache* cache = nullptr);

/// Accumulates the gradients of a view into `grads`.
void render_backward(const SceneModel& scene, const Camera& camera, const RenderOptions& options,
                     const ViewCache& cache, const OutputGrads& upstream, SceneGradients& grads);

/// Light position in world coordinates for a camera.
Vec3 light_world_position(const LightRig& light, const Camera& camera);

}  // namespace lumen::inline LUMEN_ABI
