// SPDX-License-Identifier: Apache-2.0
#include "lumen/raster.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace lumen::inline LUMEN_ABI {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

namespace {

// Limits of x/z (and y/z) used when linearizing the projection; splats far
// outside the frustum get the Jacobian of the nearest in-range direction.
struct FrustumLimits {
    Real lo_x, hi_x, lo_y, hi_y;
};

FrustumLimits frustum_limits(const Camera& cam) {
    const Real mx = Real(0.15) * Real(cam.width);
    const Real my = Real(0.15) * Real(cam.height);
    return {(-cam.cx - mx) / cam.fx, (Real(cam.width) - cam.cx + mx) / cam.fx,
            (-cam.cy - my) / cam.fy, (Real(cam.height) - cam.cy + my) / cam.fy};
}

struct ProjectionTerms {
    Vec3 pc;
    Real u, v;  // clamped x/z, y/z
    bool clamp_x, clamp_y;
    Mat23 jac;
    Mat23 t;  // J W
    Mat3 cov3d;
};

ProjectionTerms projection_terms(const Splat& splat, const Camera& cam) {
    ProjectionTerms p;
    p.pc = cam.to_camera(splat.position);
    const Real z = p.pc.z();
    const FrustumLimits lim = frustum_limits(cam);
    const Real ux = p.pc.x() / z;
    const Real vy = p.pc.y() / z;
    p.u = std::clamp(ux, lim.lo_x, lim.hi_x);
    p.v = std::clamp(vy, lim.lo_y, lim.hi_y);
    p.clamp_x = p.u != ux;
    p.clamp_y = p.v != vy;
    p.jac << cam.fx / z, 0, -cam.fx * p.u / z, 0, cam.fy / z, -cam.fy * p.v / z;
    p.t = p.jac * cam.rotation;
    p.cov3d = compute_cov3d(splat);
    return p;
}

}  // namespace

std::optional<ProjectedSplat> project_gaussian(const Splat& splat, const Camera& camera,
                                               const RasterSettings& settings) {
    const Vec3 pc = camera.to_camera(splat.position);
    if (!(pc.z() > settings.near_plane)) return std::nullopt;
    const Real opacity = splat.opacity();
    if (!(opacity >= settings.alpha_min)) return std::nullopt;

    const ProjectionTerms p = projection_terms(splat, camera);
    ProjectedSplat out;
    out.cov2d = p.t * p.cov3d * p.t.transpose();
    const Real a = out.cov2d(0, 0) + settings.lowpass;
    const Real b = Real(0.5) * (out.cov2d(0, 1) + out.cov2d(1, 0));
    const Real c = out.cov2d(1, 1) + settings.lowpass;
    const Real det = a * c - b * b;
    if (!(det > 0)) return std::nullopt;
    out.conic = Vec3(c / det, -b / det, a / det);
    out.mean2d = Vec2(camera.fx * pc.x() / pc.z() + camera.cx, camera.fy * pc.y() / pc.z() + camera.cy);
    out.view_depth = pc.z();
    out.opacity = opacity;

    // Beyond this Mahalanobis radius opacity * exp(-q/2) < alpha_min.
    const Real q_max = 2 * std::log(opacity / settings.alpha_min);
    const Real mid = Real(0.5) * (a + c);
    const Real lambda_max = mid + std::sqrt(std::max(mid * mid - det, Real(0)));
    out.radius = std::sqrt(std::max(q_max, Real(0)) * lambda_max) * Real(1.001) + Real(0.01);

    const Real x0 = std::ceil(out.mean2d.x() - out.radius - Real(0.5));
    const Real x1 = std::floor(out.mean2d.x() + out.radius - Real(0.5));
    const Real y0 = std::ceil(out.mean2d.y() - out.radius - Real(0.5));
    const Real y1 = std::floor(out.mean2d.y() + out.radius - Real(0.5));
    if (!(x1 >= 0) || !(x0 < Real(camera.width)) || !(y1 >= 0) || !(y0 < Real(camera.height)) ||
        x1 < x0 || y1 < y0) {
        return std::nullopt;
    }
    const int px0 = static_cast<int>(std::max(x0, Real(0)));
    const int px1 = static_cast<int>(std::min(x1, Real(camera.width - 1)));
    const int py0 = static_cast<int>(std::max(y0, Real(0)));
    const int py1 = static_cast<int>(std::min(y1, Real(camera.height - 1)));
    out.tile_min_x = px0 / kTileSize;
    out.tile_max_x = px1 / kTileSize + 1;
    out.tile_min_y = py0 / kTileSize;
    out.tile_max_y = py1 / kTileSize + 1;
    return out;
}

ProjectionGrad project_gaussian_backward(const Splat& splat, const Camera& camera,
                                         const RasterSettings& settings, const Vec2& grad_mean2d,
                                         const Vec3& grad_conic) {
    const ProjectionTerms p = projection_terms(splat, camera);
    const Mat2 cov2d = p.t * p.cov3d * p.t.transpose();
    Mat2 cov_reg = cov2d;
    cov_reg(0, 0) += settings.lowpass;
    cov_reg(1, 1) += settings.lowpass;
    const Mat2 conic = cov_reg.inverse();
    Mat2 g_conic;
    g_conic << grad_conic[0], grad_conic[1], grad_conic[1], grad_conic[2];
    const Mat2 g_cov = -conic * g_conic * conic;

    const Mat3 g_sigma = p.t.transpose() * g_cov * p.t;
    const Mat23 g_t = 2 * g_cov * p.t * p.cov3d;
    const Mat23 g_jac = g_t * camera.rotation.transpose();

    const Real x = p.pc.x(), y = p.pc.y(), z = p.pc.z();
    const Real fx = camera.fx, fy = camera.fy;
    Vec3 g_pc = Vec3::Zero();
    const Real du_dx = p.clamp_x ? 0 : Real(1) / z;
    const Real du_dz = p.clamp_x ? 0 : -x / (z * z);
    const Real dv_dy = p.clamp_y ? 0 : Real(1) / z;
    const Real dv_dz = p.clamp_y ? 0 : -y / (z * z);
    // J00 = fx/z, J02 = -fx u/z, J11 = fy/z, J12 = -fy v/z
    g_pc.z() += g_jac(0, 0) * (-fx / (z * z)) + g_jac(1, 1) * (-fy / (z * z));
    g_pc.x() += g_jac(0, 2) * (-fx / z) * du_dx;
    g_pc.z() += g_jac(0, 2) * (fx * p.u / (z * z) - fx / z * du_dz);
    g_pc.y() += g_jac(1, 2) * (-fy / z) * dv_dy;
    g_pc.z() += g_jac(1, 2) * (fy * p.v / (z * z) - fy / z * dv_dz);
    // mean2d = (fx x/z + cx, fy y/z + cy)
    g_pc.x() += grad_mean2d.x() * fx / z;
    g_pc.y() += grad_mean2d.y() * fy / z;
    g_pc.z() += -grad_mean2d.x() * fx * x / (z * z) - grad_mean2d.y() * fy * y / (z * z);

    ProjectionGrad out;
    out.position = camera.rotation.transpose() * g_pc;
    const Cov3dGrad gc = compute_cov3d_backward(splat, g_sigma);
    out.rotation = gc.rotation;
    out.log_scale = gc.log_scale;
    return out;
}

std::vector<std::uint32_t> depth_order(std::span<const ProjectedSplat> splats) {
    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (splats[a].view_depth != splats[b].view_depth)
            return splats[a].view_depth < splats[b].view_depth;
        return splats[a].source < splats[b].source;
    });
    return order;
}

TileBins bin_splats(std::span<const ProjectedSplat> splats, int width, int height) {
    TileBins bins;
    bins.tiles_x = (width + kTileSize - 1) / kTileSize;
    bins.tiles_y = (height + kTileSize - 1) / kTileSize;
    const std::size_t n_tiles = static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y;
    std::vector<std::uint32_t> counts(n_tiles, 0);
    for (const auto& s : splats) {
        for (int ty = s.tile_min_y; ty < s.tile_max_y; ++ty)
            for (int tx = s.tile_min_x; tx < s.tile_max_x; ++tx)
                ++counts[static_cast<std::size_t>(ty) * bins.tiles_x + tx];
    }
    bins.offsets.assign(n_tiles + 1, 0);
    for (std::size_t t = 0; t < n_tiles; ++t) bins.offsets[t + 1] = bins.offsets[t] + counts[t];
    bins.entries.resize(bins.offsets.back());
    std::vector<std::uint32_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
    for (std::uint32_t idx : depth_order(splats)) {
        const auto& s = splats[idx];
        for (int ty = s.tile_min_y; ty < s.tile_max_y; ++ty)
            for (int tx = s.tile_min_x; tx < s.tile_max_x; ++tx)
                bins.entries[cursor[static_cast<std::size_t>(ty) * bins.tiles_x + tx]++] = idx;
    }
    return bins;
}

namespace {

struct PackedSplat {
    Real mx, my, a, b, c, opacity;
};

std::vector<PackedSplat> pack(std::span<const ProjectedSplat> splats) {
    std::vector<PackedSplat> out(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const auto& s = splats[i];
        out[i] = {s.mean2d.x(), s.mean2d.y(), s.conic[0], s.conic[1], s.conic[2], s.opacity};
    }
    return out;
}

}  // namespace

RasterResult rasterize_forward(std::span<const ProjectedSplat> splats, std::span<const Real> payload,
                               int channels, const Camera& camera, const RasterSettings& settings) {
    if (channels <= 0) throw std::invalid_argument("rasterize_forward: channels must be > 0");
    if (payload.size() != splats.size() * static_cast<std::size_t>(channels)) {
        throw std::invalid_argument("rasterize_forward: payload size mismatch");
    }
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (!std::isfinite(payload[i])) {
            const std::size_t k = i / static_cast<std::size_t>(channels);
            throw std::domain_error("rasterize_forward: non-finite payload for splat " +
                                    std::to_string(splats[k].source));
        }
    }

    RasterResult out;
    out.width = camera.width;
    out.height = camera.height;
    out.channels = channels;
    const std::size_t n_pix = static_cast<std::size_t>(camera.width) * camera.height;
    out.image.assign(n_pix * channels, Real(0));
    out.alpha.assign(n_pix, Real(0));
    out.final_transmittance.assign(n_pix, Real(1));
    out.contributors.assign(n_pix, 0);
    out.bins = bin_splats(splats, camera.width, camera.height);
    const std::vector<PackedSplat> packed = pack(splats);
    const TileBins& bins = out.bins;

    parallel_for(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y, settings.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % bins.tiles_x;
        const int ty = static_cast<int>(tile) / bins.tiles_x;
        const std::uint32_t begin = bins.offsets[tile];
        const std::uint32_t end = bins.offsets[tile + 1];
        std::vector<Real> acc(static_cast<std::size_t>(channels));
        const int x_end = std::min((tx + 1) * kTileSize, camera.width);
        const int y_end = std::min((ty + 1) * kTileSize, camera.height);
        for (int py = ty * kTileSize; py < y_end; ++py) {
            for (int px = tx * kTileSize; px < x_end; ++px) {
                const Real fx = Real(px) + Real(0.5);
                const Real fy = Real(py) + Real(0.5);
                std::fill(acc.begin(), acc.end(), Real(0));
                Real T = 1;
                std::uint32_t last = 0;
                for (std::uint32_t e = begin; e < end; ++e) {
                    const std::uint32_t idx = bins.entries[e];
                    const PackedSplat& s = packed[idx];
                    const Real dx = fx - s.mx;
                    const Real dy = fy - s.my;
                    const Real power = Real(-0.5) * (s.a * dx * dx + s.c * dy * dy) - s.b * dx * dy;
                    if (power > 0) continue;
                    const Real alpha = std::min(settings.alpha_max, s.opacity * std::exp(power));
                    if (alpha < settings.alpha_min) continue;
                    const Real next_T = T * (1 - alpha);
                    if (next_T < settings.transmittance_min) break;
                    const Real w = alpha * T;
                    const Real* c = payload.data() + static_cast<std::size_t>(idx) * channels;
                    for (int k = 0; k < channels; ++k) acc[k] += w * c[k];
                    T = next_T;
                    last = e - begin + 1;
                }
                const std::size_t pix = static_cast<std::size_t>(py) * camera.width + px;
                for (int k = 0; k < channels; ++k) out.image[pix * channels + k] = acc[k];
                out.alpha[pix] = 1 - T;
                out.final_transmittance[pix] = T;
                out.contributors[pix] = last;
            }
        }
    });
    return out;
}

void RasterGrad::resize(std::size_t n, int channels) {
    mean2d.assign(n, Vec2::Zero());
    conic.assign(n, Vec3::Zero());
    opacity.assign(n, Real(0));
    payload.assign(n * static_cast<std::size_t>(channels), Real(0));
}

bool RasterGrad::all_finite() const {
    for (const auto& v : mean2d)
        if (!v.allFinite()) return false;
    for (const auto& v : conic)
        if (!v.allFinite()) return false;
    for (Real v : opacity)
        if (!std::isfinite(v)) return false;
    for (Real v : payload)
        if (!std::isfinite(v)) return false;
    return true;
}

RasterGrad rasterize_backward(std::span<const ProjectedSplat> splats, std::span<const Real> payload,
                              const RasterResult& forward, std::span<const Real> grad_image,
                              const RasterSettings& settings) {
    const int channels = forward.channels;
    const std::size_t n_pix = static_cast<std::size_t>(forward.width) * forward.height;
    const TileBins& bins = forward.bins;
    if (payload.size() != splats.size() * static_cast<std::size_t>(channels) ||
        grad_image.size() != n_pix * static_cast<std::size_t>(channels) ||
        forward.contributors.size() != n_pix ||
        bins.offsets.size() != static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y + 1) {
        throw std::invalid_argument("rasterize_backward: forward intermediates do not match inputs");
    }
    for (std::uint32_t idx : bins.entries) {
        if (idx >= splats.size())
            throw std::invalid_argument("rasterize_backward: tile list references unknown splat");
    }

    // Per tile-entry partial gradients: mean (2), conic (3), opacity (1), payload.
    const std::size_t stride = 6 + static_cast<std::size_t>(channels);
    std::vector<Real> partial(bins.entries.size() * stride, Real(0));
    const std::vector<PackedSplat> packed = pack(splats);

    parallel_for(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y, settings.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % bins.tiles_x;
        const int ty = static_cast<int>(tile) / bins.tiles_x;
        const std::uint32_t begin = bins.offsets[tile];
        std::vector<Real> suffix(static_cast<std::size_t>(channels));
        const int x_end = std::min((tx + 1) * kTileSize, forward.width);
        const int y_end = std::min((ty + 1) * kTileSize, forward.height);
        for (int py = ty * kTileSize; py < y_end; ++py) {
            for (int px = tx * kTileSize; px < x_end; ++px) {
                const std::size_t pix = static_cast<std::size_t>(py) * forward.width + px;
                const Real* g = grad_image.data() + pix * channels;
                const Real fx = Real(px) + Real(0.5);
                const Real fy = Real(py) + Real(0.5);
                std::fill(suffix.begin(), suffix.end(), Real(0));
                Real T = forward.final_transmittance[pix];
                for (std::uint32_t n = forward.contributors[pix]; n-- > 0;) {
                    const std::uint32_t e = begin + n;
                    const std::uint32_t idx = bins.entries[e];
                    const PackedSplat& s = packed[idx];
                    const Real dx = fx - s.mx;
                    const Real dy = fy - s.my;
                    const Real power = Real(-0.5) * (s.a * dx * dx + s.c * dy * dy) - s.b * dx * dy;
                    if (power > 0) continue;
                    const Real gauss = std::exp(power);
                    const Real raw_alpha = s.opacity * gauss;
                    const Real alpha = std::min(settings.alpha_max, raw_alpha);
                    if (alpha < settings.alpha_min) continue;
                    T = T / (1 - alpha);
                    const Real w = alpha * T;
                    const Real* c = payload.data() + static_cast<std::size_t>(idx) * channels;
                    Real* pg = partial.data() + static_cast<std::size_t>(e) * stride;
                    Real d_alpha = 0;
                    for (int k = 0; k < channels; ++k) {
                        pg[6 + k] += w * g[k];
                        d_alpha += g[k] * (c[k] * T - suffix[k] / (1 - alpha));
                        suffix[k] += w * c[k];
                    }
                    if (raw_alpha > settings.alpha_max) continue;
                    const Real d_power = d_alpha * alpha;
                    pg[0] += d_power * (s.a * dx + s.b * dy);
                    pg[1] += d_power * (s.b * dx + s.c * dy);
                    pg[2] += d_power * Real(-0.5) * dx * dx;
                    pg[3] += d_power * Real(-0.5) * dx * dy;
                    pg[4] += d_power * Real(-0.5) * dy * dy;
                    pg[5] += d_alpha * gauss;
                }
            }
        }
    });

    RasterGrad grad;
    grad.resize(splats.size(), channels);
    for (std::size_t e = 0; e < bins.entries.size(); ++e) {
        const std::uint32_t idx = bins.entries[e];
        const Real* pg = partial.data() + e * stride;
        grad.mean2d[idx] += Vec2(pg[0], pg[1]);
        grad.conic[idx] += Vec3(pg[2], pg[3], pg[4]);
        grad.opacity[idx] += pg[5];
        Real* gp = grad.payload.data() + static_cast<std::size_t>(idx) * channels;
        for (int k = 0; k < channels; ++k) gp[k] += pg[6 + k];
    }
    return grad;
}

}  // namespace lumen::inline LUMEN_ABI
