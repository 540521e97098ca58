// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "lumen/image.hpp"
#include "lumen/renderer.hpp"

namespace lumen::inline LUMEN_ABI {

/// A rejected override, naming the offending field.
class OverrideError : public std::invalid_argument {
public:
    OverrideError(std::string field, std::string message);
    std::string field;
    std::string detail;
};

inline constexpr Real kMaxOverrideScale = 10;

/// Light and material edits applied on top of a trained scene. Default
/// values leave the scene untouched.
struct RelightOverrides {
    std::optional<Vec3> light_offset;
    Real intensity_scale = 1;
    std::optional<Real> spot_inner;
    std::optional<Real> spot_outer;
    Real atten_scale = 1;
    /// Spotlight axis in the camera frame. Set to decouple the light
    /// direction from the camera.
    std::optional<Vec3> light_direction;
    Real roughness_scale = 1;
    Vec3 albedo_tint = Vec3::Ones();

    bool empty() const;
    void validate() const;
};

struct RelightSetup {
    /// The input scene when no material override is active.
    std::shared_ptr<const SceneModel> scene;
    LightRig light;
    RenderOptions options;
};

RelightSetup apply_overrides(std::shared_ptr<const SceneModel> scene, const RelightOverrides& overrides,
                             RenderOptions options = {});

RenderOutput render_relit(const RelightSetup& setup, const Camera& camera);

/// Names accepted by buffer_image.
const std::vector<std::string>& buffer_names();

/// Displayable image of a buffer: colors as is, normals mapped to
/// (n + 1) / 2, depth divided by its maximum.
Image buffer_image(const RenderOutput& out, const std::string& name);

}  // namespace lumen::inline LUMEN_ABI
