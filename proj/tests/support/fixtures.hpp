// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small scenes shared by the unit tests.

#include <random>
#include <vector>

#include "lumen/neural.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI::fixtures {

/// A patch of surface splats facing a camera at the origin looking down +z.
inline SceneModel surface_patch(std::uint64_t seed, int count = 48, bool hash = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    SceneModel s;
    for (int i = 0; i < count; ++i) {
        const Vec3 p(Real(u(rng) * 2 - 1), Real(u(rng) * 2 - 1), Real(3 + u(rng)));
        const Vec3 n = Vec3(Real(u(rng) - 0.5) * Real(0.6), Real(u(rng) - 0.5) * Real(0.6), -1).normalized();
        const Vec3 a(Real(0.2 + 0.6 * u(rng)), Real(0.2 + 0.6 * u(rng)), Real(0.2 + 0.6 * u(rng)));
        s.splats.push_back(make_surface_splat(p, n, Real(0.25 + 0.2 * u(rng)), Real(0.5 + 0.4 * u(rng)), a,
                                              Real(0.2 + 0.6 * u(rng)), Real(0.01 + 0.015 * u(rng))));
    }
    s.light.offset = Vec3(Real(0.1), 0, 0);
    s.light.intensity = Vec3(4, 4, 4);
    s.light.atten_coeffs = Vec3(1, 0, Real(0.05));
    s.light.spot_inner = Real(0.5);
    s.light.spot_outer = Real(1.1);
    if (hash) {
        s.hash = make_hashgrid(Vec3(-3, -3, -1), Vec3(3, 3, 6), seed, 4, 10, 2, 4, Real(1.5));
        s.mlp = make_mlp(s.hash->output_dim(), 4, seed, {16, 16});
    } else {
        s.mlp = make_mlp(0, 4, seed, {16, 16});
    }
    return s;
}

/// Gives the network's output layer random weights so the multiplier varies.
inline void randomize_output_layer(MlpParams& mlp, std::uint64_t seed, Real scale = Real(0.3)) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    auto& w = mlp.weights.back();
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Real(scale * g(rng));
    mlp.biases.back()[0] = Real(0.1);
}

inline Camera patch_camera(int w = 48, int h = 40) {
    Camera c;
    c.width = w;
    c.height = h;
    c.fx = c.fy = Real(0.9 * w);
    c.cx = Real(0.5 * w);
    c.cy = Real(0.5 * h);
    return c;
}

}  // namespace lumen::inline LUMEN_ABI::fixtures
