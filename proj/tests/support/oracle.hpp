// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference renderer: every pixel visits every splat in depth
// order. No tiles, no extents, no shared code with the rasterizer beyond
// the scene types.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lumen/raster.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI::oracle {

struct Footprint {
    bool valid = false;
    double mx = 0, my = 0, depth = 0, opacity = 0;
    Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
};

inline Footprint footprint(const Splat& s, const Camera& cam, const RasterSettings& rs) {
    Footprint f;
    const Eigen::Matrix3d W = cam.rotation.template cast<double>();
    const Eigen::Vector3d p = W * s.position.template cast<double>() + cam.translation.template cast<double>();
    if (!(p.z() > rs.near_plane)) return f;
    f.opacity = 1.0 / (1.0 + std::exp(-static_cast<double>(s.opacity_logit)));
    if (f.opacity < rs.alpha_min) return f;

    Eigen::Quaterniond q(s.rotation[0], s.rotation[1], s.rotation[2], s.rotation[3]);
    q.normalize();
    const Eigen::Matrix3d R = q.toRotationMatrix();
    Eigen::Matrix3d S2 = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k) S2(k, k) = std::exp(2.0 * s.log_scale[k]);
    const Eigen::Matrix3d sigma = R * S2 * R.transpose();

    // Jacobian evaluated at the frustum-clamped ray direction.
    const double fx = cam.fx, fy = cam.fy, cx = cam.cx, cy = cam.cy;
    const double margin_x = 0.15 * cam.width, margin_y = 0.15 * cam.height;
    const double u = std::clamp(p.x() / p.z(), (-cx - margin_x) / fx, (cam.width - cx + margin_x) / fx);
    const double v = std::clamp(p.y() / p.z(), (-cy - margin_y) / fy, (cam.height - cy + margin_y) / fy);
    Eigen::Matrix<double, 2, 3> J;
    J << fx / p.z(), 0, -fx * u / p.z(), 0, fy / p.z(), -fy * v / p.z();
    Eigen::Matrix2d cov = J * W * sigma * W.transpose() * J.transpose();
    cov = 0.5 * (cov + cov.transpose());
    cov += static_cast<double>(rs.lowpass) * Eigen::Matrix2d::Identity();
    if (!(cov.determinant() > 0)) return f;
    f.conic = cov.inverse();
    f.mx = fx * p.x() / p.z() + cx;
    f.my = fy * p.y() / p.z() + cy;
    f.depth = p.z();
    f.valid = true;
    return f;
}

/// Composites `payload` (scene splat index major, `channels` per splat).
/// Returns height x width x channels followed by nothing else; alpha goes
/// into `alpha_out` when given.
inline std::vector<double> naive_render(const std::vector<Splat>& splats, const std::vector<double>& payload,
                                        int channels, const Camera& cam, const RasterSettings& rs,
                                        std::vector<double>* alpha_out = nullptr) {
    std::vector<Footprint> fp(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) fp[i] = footprint(splats[i], cam, rs);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < splats.size(); ++i)
        if (fp[i].valid) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        // Depths are compared at the precision the renderer stores them in.
        const Real da = static_cast<Real>(cam.to_camera(splats[a].position).z());
        const Real db = static_cast<Real>(cam.to_camera(splats[b].position).z());
        return da != db ? da < db : a < b;
    });

    std::vector<double> img(static_cast<std::size_t>(cam.width) * cam.height * channels, 0.0);
    if (alpha_out) alpha_out->assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            double T = 1;
            double* out = img.data() + (static_cast<std::size_t>(y) * cam.width + x) * channels;
            for (std::size_t i : order) {
                const double dx = x + 0.5 - fp[i].mx, dy = y + 0.5 - fp[i].my;
                const Eigen::Vector2d d(dx, dy);
                const double alpha = std::min<double>(rs.alpha_max, fp[i].opacity * std::exp(-0.5 * d.dot(fp[i].conic * d)));
                if (alpha < rs.alpha_min) continue;
                if (T * (1 - alpha) < rs.transmittance_min) break;
                for (int k = 0; k < channels; ++k) out[k] += alpha * T * payload[i * channels + k];
                T *= 1 - alpha;
            }
            if (alpha_out) (*alpha_out)[static_cast<std::size_t>(y) * cam.width + x] = 1 - T;
        }
    return img;
}

/// Random scene exercising near-plane rejection, off-screen splats, alpha
/// clamping, anisotropy and exact depth ties.
inline std::vector<Splat> random_splats(std::mt19937_64& rng, int max_splats) {
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> count(1, max_splats);
    const int n = count(rng);
    std::vector<Splat> out;
    for (int i = 0; i < n; ++i) {
        Splat s;
        const double z = u(rng) < 0.05 ? 0.02 + 0.05 * u(rng) : 0.5 + 3.0 * u(rng);
        s.position = Vec3(static_cast<Real>((u(rng) - 0.5) * 1.6 * z), static_cast<Real>((u(rng) - 0.5) * 1.6 * z),
                          static_cast<Real>(z));
        if (i > 0 && u(rng) < 0.1) s.position.z() = out[static_cast<std::size_t>(i - 1)].position.z();
        s.rotation = Vec4(static_cast<Real>(u(rng) - 0.5), static_cast<Real>(u(rng) - 0.5),
                          static_cast<Real>(u(rng) - 0.5), static_cast<Real>(u(rng) - 0.5));
        if (s.rotation.norm() < 1e-3) s.rotation = Vec4(1, 0, 0, 0);
        for (int k = 0; k < 3; ++k) s.log_scale[k] = static_cast<Real>(std::log(0.01 + 0.25 * u(rng)));
        if (u(rng) < 0.5) s.log_scale[static_cast<int>(3 * u(rng)) % 3] = static_cast<Real>(std::log(1e-6));
        s.opacity_logit = static_cast<Real>(8 * u(rng) - 4 + (u(rng) < 0.1 ? 8 : 0));
        out.push_back(s);
    }
    return out;
}

}  // namespace lumen::inline LUMEN_ABI::oracle
