// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lumen/math.hpp"
#include "lumen/neural.hpp"

namespace lumen::inline LUMEN_ABI {

/// Upper bound of the base reflectance (tissue-like dielectrics).
inline constexpr Real kMaxF0 = Real(0.03);

/// One flattened relightable Gaussian. Material fields are stored
/// unconstrained and squashed on read.
struct Splat {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = Vec4(1, 0, 0, 0);  // (w, x, y, z)
    Vec3 log_scale = Vec3::Zero();
    Real opacity_logit = 0;
    Vec3 albedo_logit = Vec3::Zero();
    Real roughness_logit = 0;
    Real f0_logit = 0;

    Real opacity() const { return sigmoid(opacity_logit); }
    Vec3 albedo() const {
        return Vec3(sigmoid(albedo_logit[0]), sigmoid(albedo_logit[1]), sigmoid(albedo_logit[2]));
    }
    Real roughness() const { return sigmoid(roughness_logit); }
    Real f0() const { return kMaxF0 * sigmoid(f0_logit); }
    Vec3 scale() const { return log_scale.array().exp().matrix(); }

    /// Axis with the smallest scale; ties go to the lowest index.
    int flat_axis() const;

    void set_albedo(const Vec3& a);
    void set_roughness(Real r);
    void set_f0(Real f0);
    void set_opacity(Real o);
};

/// Pinhole camera. world_to_camera maps x_cam = rotation * x_world + translation,
/// with +z forward, +x right and +y down in the image.
struct Camera {
    Real fx = 100, fy = 100, cx = 64, cy = 64;
    int width = 128, height = 128;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 center() const { return -rotation.transpose() * translation; }
    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    void validate() const;

    /// Camera at `eye` looking at `target`; `up` fixes the roll.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, Real fx, Real fy,
                          int width, int height);
};

/// Colocated point light, specified in the camera frame.
struct LightRig {
    Vec3 offset = Vec3::Zero();
    Vec3 intensity = Vec3::Ones();
    Vec3 atten_coeffs = Vec3(1, 0, 0);  // (constant, linear, quadratic)
    Real spot_inner = Real(kPi);
    Real spot_outer = Real(kPi);

    void validate() const;
};

struct SceneModel {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::vector<Splat> splats;
    LightRig light;
    MlpParams mlp;
    std::optional<HashGridParams> hash;
    std::uint32_t format_version = kFormatVersion;

    void validate() const;
    /// Axis-aligned bounds of all splat centers.
    std::pair<Vec3, Vec3> bounding_box() const;
};

Mat3 compute_cov3d(const Splat& splat);

struct Cov3dGrad {
    Vec4 rotation = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
};

/// Pulls dLoss/dSigma back to the raw quaternion and log scales.
Cov3dGrad compute_cov3d_backward(const Splat& splat, const Mat3& grad_cov);

/// World-space flat-axis direction, unflipped.
Vec3 splat_axis_normal(const Splat& splat);

/// World-space unit normal facing the camera center.
Vec3 splat_normal(const Splat& splat, const Camera& camera);

Splat flatten_scales(const Splat& splat);

/// Clamps the flat axis to the flat epsilon, keeps the others strictly
/// larger and renormalizes the quaternion. Used after every optimizer step.
void enforce_splat_invariants(Splat& splat);

/// Splat whose flat axis (local z) is aligned with `normal`.
Splat make_surface_splat(const Vec3& position, const Vec3& normal, Real radius, Real opacity,
                         const Vec3& albedo, Real roughness, Real f0);

}  // namespace lumen::inline LUMEN_ABI
