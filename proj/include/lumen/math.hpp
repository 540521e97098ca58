// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lumen/config.hpp"

namespace lumen::inline LUMEN_ABI {

using Vec2 = Eigen::Matrix<Real, 2, 1>;
using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Vec4 = Eigen::Matrix<Real, 4, 1>;
using Mat2 = Eigen::Matrix<Real, 2, 2>;
using Mat3 = Eigen::Matrix<Real, 3, 3>;
using Mat23 = Eigen::Matrix<Real, 2, 3>;

inline Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

inline Real logit(Real p) { return std::log(p / (Real(1) - p)); }

inline Real softplus(Real x) {
    return x > Real(20) ? x : std::log1p(std::exp(x));
}

inline Real softplus_inverse(Real y) {
    return y > Real(20) ? y : std::log(std::expm1(y));
}

/// Gradient of y = x/|x| pulled back to x.
inline Vec3 normalize_backward(const Vec3& x, const Vec3& grad_y) {
    const Real len = x.norm();
    const Vec3 y = x / len;
    return (grad_y - y * y.dot(grad_y)) / len;
}

/// Quaternion stored as (w, x, y, z). Input need not be unit length.
inline Mat3 quat_to_matrix(const Vec4& q_raw) {
    const Vec4 q = q_raw.normalized();
    const Real w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// Pull a gradient w.r.t. the rotation matrix back to the raw quaternion,
/// including the normalization step.
inline Vec4 quat_to_matrix_backward(const Vec4& q_raw, const Mat3& g) {
    const Real len = q_raw.norm();
    const Vec4 q = q_raw / len;
    const Real w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 dq;
    dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) -
                 y * g(2, 0) + x * g(2, 1));
    dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) -
                 w * g(1, 2) + z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
    dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) +
                 z * g(1, 2) - w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
    dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                 2 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return (dq - q * q.dot(dq)) / len;
}

inline Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
    return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

inline Vec4 matrix_to_quat(const Mat3& r) {
    Eigen::Quaternion<Real> q(r);
    q.normalize();
    return Vec4(q.w(), q.x(), q.y(), q.z());
}

}  // namespace lumen::inline LUMEN_ABI
