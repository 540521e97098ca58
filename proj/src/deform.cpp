// SPDX-License-Identifier: Apache-2.0
#include "lumen/deform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

namespace lumen::inline LUMEN_ABI {

namespace {

std::string cell_name(const std::array<int, 3>& c) {
    return "(" + std::to_string(c[0]) + ", " + std::to_string(c[1]) + ", " + std::to_string(c[2]) + ")";
}

Vec4 compose(const Mat3& r, const Vec4& q) {
    Vec4 out = quat_multiply(matrix_to_quat(r), q);
    return out / out.norm();
}

}  // namespace

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

Cage Cage::identity(const Vec3& min, const Vec3& max, std::array<int, 3> cells) {
    Cage c;
    c.min = min;
    c.max = max;
    c.cells = cells;
    for (int k = 0; k <= cells[2]; ++k)
        for (int j = 0; j <= cells[1]; ++j)
            for (int i = 0; i <= cells[0]; ++i) {
                const Vec3 u(Real(i) / Real(cells[0]), Real(j) / Real(cells[1]), Real(k) / Real(cells[2]));
                c.points.push_back(min + (max - min).cwiseProduct(u));
            }
    return c;
}

std::size_t Cage::index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * (cells[1] + 1) + static_cast<std::size_t>(j)) * (cells[0] + 1) +
           static_cast<std::size_t>(i);
}

void Cage::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (cells[a] < 1) throw DeformError("cage: cell counts must be >= 1");
        if (!(max[a] > min[a])) throw DeformError("cage: max must exceed min on every axis");
    }
    const std::size_t want = static_cast<std::size_t>(cells[0] + 1) * (cells[1] + 1) * (cells[2] + 1);
    if (points.size() != want)
        throw DeformError("cage: expected " + std::to_string(want) + " control points, got " +
                          std::to_string(points.size()));
    for (const auto& p : points)
        if (!p.allFinite()) throw DeformError("cage: control point is not finite");
}

std::pair<std::array<int, 3>, Vec3> Cage::locate(const Vec3& x) const {
    std::array<int, 3> cell{};
    Vec3 local;
    for (int a = 0; a < 3; ++a) {
        const Real u = (x[a] - min[a]) / (max[a] - min[a]) * Real(cells[a]);
        if (!(u >= 0 && u <= Real(cells[a]))) throw DeformError("cage: point outside the lattice");
        cell[a] = std::min(static_cast<int>(u), cells[a] - 1);
        local[a] = u - Real(cell[a]);
    }
    return {cell, local};
}

Vec3 Cage::map(const Vec3& x) const {
    const auto [c, u] = locate(x);
    Vec3 out = Vec3::Zero();
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const Real w = (dx ? u.x() : 1 - u.x()) * (dy ? u.y() : 1 - u.y()) * (dz ? u.z() : 1 - u.z());
                out += w * points[index(c[0] + dx, c[1] + dy, c[2] + dz)];
            }
    return out;
}

Mat3 Cage::jacobian(const Vec3& x) const {
    const auto [c, u] = locate(x);
    Mat3 d_local = Mat3::Zero();  // columns: d/du, d/dv, d/dw
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const Real wx = dx ? u.x() : 1 - u.x(), wy = dy ? u.y() : 1 - u.y(), wz = dz ? u.z() : 1 - u.z();
                const Real sx = dx ? 1 : -1, sy = dy ? 1 : -1, sz = dz ? 1 : -1;
                const Vec3& p = points[index(c[0] + dx, c[1] + dy, c[2] + dz)];
                d_local.col(0) += sx * wy * wz * p;
                d_local.col(1) += wx * sy * wz * p;
                d_local.col(2) += wx * wy * sz * p;
            }
    Vec3 inv_size;
    for (int a = 0; a < 3; ++a) inv_size[a] = Real(cells[a]) / (max[a] - min[a]);
    return d_local * inv_size.asDiagonal();
}

Mat3 polar_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0) u.col(2) = -u.col(2);
    return u * v.transpose();
}

SceneModel deform_splats(const SceneModel& scene, const Deformation& deformation) {
    SceneModel out = scene;
    const std::size_t n = scene.splats.size();
    if (const auto* rigid = std::get_if<RigidTransform>(&deformation)) {
        for (auto& s : out.splats) {
            s.position = rigid->apply(s.position);
            s.rotation = compose(rigid->rotation, s.rotation);
        }
    } else if (const auto* field = std::get_if<RigidField>(&deformation)) {
        if (field->transforms.size() != n)
            throw DeformError("rigid field has " + std::to_string(field->transforms.size()) + " transforms for " +
                              std::to_string(n) + " splats");
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = out.splats[i];
            s.position = field->transforms[i].apply(s.position);
            s.rotation = compose(field->transforms[i].rotation, s.rotation);
        }
    } else {
        const Cage& cage = std::get<Cage>(deformation);
        cage.validate();
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = out.splats[i];
            std::pair<std::array<int, 3>, Vec3> where;
            try {
                where = cage.locate(s.position);
            } catch (const DeformError&) {
                throw DeformError("cage: splat " + std::to_string(i) + " lies outside the lattice");
            }
            const Mat3 j = cage.jacobian(s.position);
            // det J is the local volume ratio of the map.
            if (!j.allFinite() || !(j.determinant() > Real(1e-6)))
                throw DeformError("cage cell " + cell_name(where.first) + " has a non-invertible Jacobian");
            s.position = cage.map(s.position);
            s.rotation = compose(polar_rotation(j), s.rotation);
        }
    }
    return out;
}

Camera transform_camera(const Camera& camera, const RigidTransform& t) {
    Camera c = camera;
    c.rotation = camera.rotation * t.rotation.transpose();
    c.translation = camera.translation - c.rotation * t.translation;
    return c;
}

}  // namespace lumen::inline LUMEN_ABI
