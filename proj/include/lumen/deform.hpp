// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <stdexcept>
#include <variant>
#include <vector>

#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

class DeformError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// x -> rotation * x + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
    RigidTransform inverse() const;
};

/// One rigid transform per splat.
struct RigidField {
    std::vector<RigidTransform> transforms;
};

/// Regular lattice of (cells + 1) control points per axis over [min, max].
/// Points are mapped by trilinear interpolation of the displaced control
/// points of their cell.
struct Cage {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Ones();
    std::array<int, 3> cells = {1, 1, 1};
    /// x-fastest, then y, then z.
    std::vector<Vec3> points;

    static Cage identity(const Vec3& min, const Vec3& max, std::array<int, 3> cells);
    std::size_t index(int i, int j, int k) const;
    void validate() const;

    /// Cell containing x and the local coordinates in [0, 1]^3.
    /// Throws when x is outside the lattice.
    std::pair<std::array<int, 3>, Vec3> locate(const Vec3& x) const;
    Vec3 map(const Vec3& x) const;
    /// d map / d x at x.
    Mat3 jacobian(const Vec3& x) const;
};

using Deformation = std::variant<RigidTransform, RigidField, Cage>;

/// Positions go through the transform; rotations are composed with its
/// local rotation (the polar factor of the Jacobian for cages). Scales and
/// materials are unchanged. Hash-grid features stay where they are in world
/// space.
SceneModel deform_splats(const SceneModel& scene, const Deformation& deformation);

/// The camera that sees the rigidly moved scene as the original camera saw
/// the original one.
Camera transform_camera(const Camera& camera, const RigidTransform& transform);

/// Rotation closest to m (polar decomposition through the SVD).
Mat3 polar_rotation(const Mat3& m);

}  // namespace lumen::inline LUMEN_ABI
