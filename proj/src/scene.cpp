// SPDX-License-Identifier: Apache-2.0
#include "lumen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lumen::inline LUMEN_ABI {

namespace {

// Orthonormality tolerance for camera rotations: 1e-6, widened to a few ulps
// of the working precision.
constexpr Real kOrthoTol =
    std::max(Real(1e-6), Real(32) * std::numeric_limits<Real>::epsilon());

}  // namespace

int Splat::flat_axis() const {
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
        if (log_scale[a] < log_scale[axis]) axis = a;
    }
    return axis;
}

void Splat::set_albedo(const Vec3& a) {
    for (int c = 0; c < 3; ++c) albedo_logit[c] = logit(std::clamp(a[c], Real(1e-4), Real(1 - 1e-4)));
}

void Splat::set_roughness(Real r) { roughness_logit = logit(std::clamp(r, Real(1e-4), Real(1 - 1e-4))); }

void Splat::set_f0(Real f0) {
    f0_logit = logit(std::clamp(f0 / kMaxF0, Real(1e-4), Real(1 - 1e-4)));
}

void Splat::set_opacity(Real o) { opacity_logit = logit(std::clamp(o, Real(1e-4), Real(1 - 1e-4))); }

void Camera::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera: focal lengths must be > 0");
    if (width < 16 || height < 16) throw std::invalid_argument("camera: image must be at least 16x16");
    const Real err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= kOrthoTol)) throw std::invalid_argument("camera: rotation is not orthonormal");
    if (!translation.allFinite()) throw std::invalid_argument("camera: non-finite translation");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, Real fx, Real fy,
                       int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.width = width;
    cam.height = height;
    cam.cx = Real(width) / 2;
    cam.cy = Real(height) / 2;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

void LightRig::validate() const {
    if (!offset.allFinite()) throw std::invalid_argument("light: non-finite offset");
    if (!(intensity.array() >= 0).all()) throw std::invalid_argument("light: intensity must be >= 0");
    if (!(atten_coeffs.array() >= 0).all())
        throw std::invalid_argument("light: attenuation coefficients must be >= 0");
    if (!(atten_coeffs.maxCoeff() > 0))
        throw std::invalid_argument("light: at least one attenuation coefficient must be > 0");
    if (!(spot_inner > 0) || !(spot_inner <= spot_outer) || !(spot_outer <= Real(kPi) * Real(1 + 1e-6)))
        throw std::invalid_argument("light: spot angles must satisfy 0 < inner <= outer <= pi");
}

void SceneModel::validate() const {
    if (splats.empty()) throw std::invalid_argument("scene: no splats");
    if (format_version != kFormatVersion) throw std::invalid_argument("scene: unsupported format version");
    light.validate();
    if (mlp.weights.empty()) throw std::invalid_argument("scene: missing diffuse network");
    const int hash_dim = hash ? hash->output_dim() : 0;
    if (mlp.hash_inputs() != hash_dim)
        throw std::invalid_argument("scene: network input width does not match hash encoding");
    if (hash) hash->validate();
}

std::pair<Vec3, Vec3> SceneModel::bounding_box() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<Real>::infinity());
    Vec3 hi = -lo;
    for (const auto& s : splats) {
        lo = lo.cwiseMin(s.position);
        hi = hi.cwiseMax(s.position);
    }
    return {lo, hi};
}

Mat3 compute_cov3d(const Splat& splat) {
    const Mat3 r = quat_to_matrix(splat.rotation);
    const Mat3 m = r * splat.scale().asDiagonal();
    return m * m.transpose();
}

Cov3dGrad compute_cov3d_backward(const Splat& splat, const Mat3& grad_cov) {
    const Mat3 r = quat_to_matrix(splat.rotation);
    const Vec3 s = splat.scale();
    const Mat3 m = r * s.asDiagonal();
    // Sigma = M M^T  =>  dM = (G + G^T) M
    const Mat3 grad_m = (grad_cov + grad_cov.transpose()) * m;
    Cov3dGrad out;
    const Mat3 grad_r = grad_m * s.asDiagonal();
    out.rotation = quat_to_matrix_backward(splat.rotation, grad_r);
    const Mat3 rt_gm = r.transpose() * grad_m;
    for (int a = 0; a < 3; ++a) out.log_scale[a] = rt_gm(a, a) * s[a];
    return out;
}

Vec3 splat_axis_normal(const Splat& splat) {
    return quat_to_matrix(splat.rotation).col(splat.flat_axis());
}

Vec3 splat_normal(const Splat& splat, const Camera& camera) {
    Vec3 n = splat_axis_normal(splat).normalized();
    if (n.dot(camera.center() - splat.position) < 0) n = -n;
    return n;
}

Splat flatten_scales(const Splat& splat) {
    Splat out = splat;
    out.log_scale[splat.flat_axis()] = static_cast<Real>(std::log(kFlatEpsilon));
    return out;
}

void enforce_splat_invariants(Splat& splat) {
    const Real n = splat.rotation.norm();
    splat.rotation = n > Real(0) ? Vec4(splat.rotation / n) : Vec4(1, 0, 0, 0);
    const int flat = splat.flat_axis();
    const Real flat_log = static_cast<Real>(std::log(kFlatEpsilon));
    const Real floor_log = static_cast<Real>(std::log(2 * kFlatEpsilon));
    for (int a = 0; a < 3; ++a) {
        if (a == flat) {
            splat.log_scale[a] = flat_log;
        } else {
            splat.log_scale[a] = std::max(splat.log_scale[a], floor_log);
        }
    }
}

Splat make_surface_splat(const Vec3& position, const Vec3& normal, Real radius, Real opacity,
                         const Vec3& albedo, Real roughness, Real f0) {
    Splat s;
    s.position = position;
    const Eigen::Quaternion<Real> q =
        Eigen::Quaternion<Real>::FromTwoVectors(Vec3::UnitZ(), normal.normalized());
    s.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
    s.log_scale = Vec3(std::log(radius), std::log(radius), static_cast<Real>(std::log(kFlatEpsilon)));
    s.set_opacity(opacity);
    s.set_albedo(albedo);
    s.set_roughness(roughness);
    s.set_f0(f0);
    return s;
}

}  // namespace lumen::inline LUMEN_ABI
