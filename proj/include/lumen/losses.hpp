// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "lumen/image.hpp"
#include "lumen/math.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

/// A loss value with its gradient w.r.t. the first (rendered) argument.
struct LossValue {
    Real value = 0;
    std::vector<Real> grad;
};

/// Mean absolute error over all pixels and channels.
LossValue loss_rgb(std::span<const Real> render, std::span<const Real> target);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Mean SSIM over all pixels and channels, Gaussian window, zero padding.
Real ssim(std::span<const Real> a, std::span<const Real> b, int width, int height, int channels,
          const SsimParams& params = {});

/// (1 - SSIM) / 2 and its gradient w.r.t. `render`.
LossValue loss_dssim(std::span<const Real> render, std::span<const Real> target, int width, int height,
                     int channels, const SsimParams& params = {});

/// Median-aligned L1 over pixels with alpha > 0.5 and a positive target.
/// Each map is divided by its own (lower) median over the valid set.
LossValue loss_depth(std::span<const Real> rendered, std::span<const Real> target, std::span<const Real> alpha);

struct NormalLossValue {
    Real value = 0;
    std::vector<Real> grad_normal;
    std::vector<Real> grad_depth;
};

/// Normal from depth: cross product of back-projected finite differences
/// (right and down neighbours), oriented toward the camera.
Vec3 depth_normal_at(std::span<const Real> depth, const Camera& camera, int x, int y);

/// Mean (1 - n . n_depth) over pixels whose 2x2 forward stencil has
/// alpha > 0.5.
NormalLossValue loss_normal(std::span<const Real> normals, std::span<const Real> depth,
                            std::span<const Real> alpha, const Camera& camera);

struct DiffuseLossValue {
    Real value = 0;
    std::vector<Real> grad_multiplier;
    std::vector<Vec3> grad_albedo;
};

/// Mean over splats of |m a / pi - a / pi|^2.
DiffuseLossValue loss_diffuse(std::span<const Real> multipliers, std::span<const Vec3> albedos);

struct TissueLossValue {
    Real value = 0;
    std::vector<Vec3> grad_albedo;
    std::vector<Real> grad_roughness;
    std::vector<Real> grad_f0;
};

/// Sum over splats of squared deviations of albedo (all channels),
/// roughness and f0 from their means.
TissueLossValue loss_tissue(std::span<const Vec3> albedo, std::span<const Real> roughness,
                            std::span<const Real> f0);
TissueLossValue loss_tissue(std::span<const Splat> splats);

struct LossWeights {
    Real rgb = Real(0.8);
    Real dssim = Real(0.2);
    Real depth = Real(0.5);
    Real normal = Real(0.1);
    Real diffuse = Real(0.01);
    Real tissue = Real(0.01);
};

struct LossTerms {
    Real rgb = 0;
    Real dssim = 0;
    Real depth = 0;
    Real normal = 0;
    Real diffuse = 0;
    Real tissue = 0;
};

Real total_loss(const LossTerms& terms, const LossWeights& weights);

/// PSNR in dB for signals in [0, 1]; zero error reports `cap`.
Real psnr(std::span<const Real> a, std::span<const Real> b, Real cap = 99);

}  // namespace lumen::inline LUMEN_ABI
