// SPDX-License-Identifier: Apache-2.0
#include "lumen/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lumen::inline LUMEN_ABI {

LossValue loss_rgb(std::span<const Real> render, std::span<const Real> target) {
    if (render.size() != target.size()) throw std::invalid_argument("loss_rgb: size mismatch");
    LossValue out;
    out.grad.assign(render.size(), 0);
    if (render.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(render.size());
    double sum = 0;
    for (std::size_t i = 0; i < render.size(); ++i) {
        const double d = static_cast<double>(render[i]) - target[i];
        sum += std::abs(d);
        out.grad[i] = static_cast<Real>(d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0));
    }
    out.value = static_cast<Real>(sum * inv_n);
    return out;
}

namespace {

std::vector<double> gaussian_kernel(const SsimParams& p) {
    if (p.window < 1 || p.window % 2 == 0) throw std::invalid_argument("ssim: window must be odd");
    std::vector<double> k(static_cast<std::size_t>(p.window));
    const int half = p.window / 2;
    double sum = 0;
    for (int i = 0; i < p.window; ++i) {
        const double x = i - half;
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2 * p.sigma * p.sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable "same" filtering of one channel plane with zero padding.
// The kernel is symmetric, so this operator is its own adjoint.
void blur(const std::vector<double>& in, std::vector<double>& out, int w, int h, const std::vector<double>& k) {
    const int half = static_cast<int>(k.size()) / 2;
    std::vector<double> tmp(in.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int t = -half; t <= half; ++t) {
                const int xx = x + t;
                if (xx >= 0 && xx < w) s += k[static_cast<std::size_t>(t + half)] * in[static_cast<std::size_t>(y * w + xx)];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = s;
        }
    out.assign(in.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int t = -half; t <= half; ++t) {
                const int yy = y + t;
                if (yy >= 0 && yy < h) s += k[static_cast<std::size_t>(t + half)] * tmp[static_cast<std::size_t>(yy * w + x)];
            }
            out[static_cast<std::size_t>(y * w + x)] = s;
        }
}

struct SsimResult {
    double mean = 0;
    std::vector<double> grad;  // d mean / d a, interleaved
};

SsimResult ssim_impl(std::span<const Real> a, std::span<const Real> b, int w, int h, int c, const SsimParams& p,
                     bool want_grad) {
    const std::size_t np = static_cast<std::size_t>(w) * h;
    if (a.size() != np * c || b.size() != a.size()) throw std::invalid_argument("ssim: size mismatch");
    const auto k = gaussian_kernel(p);
    SsimResult r;
    if (want_grad) r.grad.assign(a.size(), 0.0);
    if (np == 0 || c == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(a.size());
    std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
    std::vector<double> mx, my, exx, eyy, exy;
    double total = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < np; ++i) {
            x[i] = a[i * c + ch];
            y[i] = b[i * c + ch];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        blur(x, mx, w, h, k);
        blur(y, my, w, h, k);
        blur(xx, exx, w, h, k);
        blur(yy, eyy, w, h, k);
        blur(xy, exy, w, h, k);
        std::vector<double> d_mx(np), d_exx(np), d_exy(np);
        for (std::size_t i = 0; i < np; ++i) {
            const double sxx = exx[i] - mx[i] * mx[i];
            const double syy = eyy[i] - my[i] * my[i];
            const double sxy = exy[i] - mx[i] * my[i];
            const double a1 = 2 * mx[i] * my[i] + p.c1;
            const double a2 = 2 * sxy + p.c2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + p.c1;
            const double b2 = sxx + syy + p.c2;
            const double s = a1 * a2 / (b1 * b2);
            total += s;
            if (want_grad) {
                const double bb = b1 * b2;
                d_mx[i] = inv_n * (2 * my[i] * a2 / bb - 2 * my[i] * a1 / bb - s * 2 * mx[i] / b1 + s * 2 * mx[i] / b2);
                d_exx[i] = inv_n * (-s / b2);
                d_exy[i] = inv_n * (2 * a1 / bb);
            }
        }
        if (want_grad) {
            std::vector<double> g_mx, g_exx, g_exy;
            blur(d_mx, g_mx, w, h, k);
            blur(d_exx, g_exx, w, h, k);
            blur(d_exy, g_exy, w, h, k);
            for (std::size_t i = 0; i < np; ++i) r.grad[i * c + ch] = g_mx[i] + 2 * x[i] * g_exx[i] + y[i] * g_exy[i];
        }
    }
    r.mean = total * inv_n;
    return r;
}

}  // namespace

Real ssim(std::span<const Real> a, std::span<const Real> b, int width, int height, int channels,
          const SsimParams& params) {
    return static_cast<Real>(ssim_impl(a, b, width, height, channels, params, false).mean);
}

LossValue loss_dssim(std::span<const Real> render, std::span<const Real> target, int width, int height,
                     int channels, const SsimParams& params) {
    const SsimResult r = ssim_impl(render, target, width, height, channels, params, true);
    LossValue out;
    out.value = static_cast<Real>((1.0 - r.mean) / 2.0);
    out.grad.resize(r.grad.size());
    for (std::size_t i = 0; i < r.grad.size(); ++i) out.grad[i] = static_cast<Real>(-0.5 * r.grad[i]);
    return out;
}

namespace {

// Index of the lower median of values[idx[...]].
std::size_t lower_median(std::span<const Real> values, std::vector<std::size_t> idx) {
    const std::size_t mid = (idx.size() - 1) / 2;
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(mid), idx.end(),
                     [&](std::size_t i, std::size_t j) { return values[i] < values[j] || (values[i] == values[j] && i < j); });
    return idx[mid];
}

}  // namespace

LossValue loss_depth(std::span<const Real> rendered, std::span<const Real> target, std::span<const Real> alpha) {
    if (rendered.size() != target.size() || alpha.size() != rendered.size())
        throw std::invalid_argument("loss_depth: size mismatch");
    LossValue out;
    out.grad.assign(rendered.size(), 0);
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < rendered.size(); ++i)
        if (alpha[i] > Real(0.5) && target[i] > 0) valid.push_back(i);
    if (valid.empty()) return out;
    const std::size_t ir = lower_median(rendered, valid);
    const std::size_t it = lower_median(target, valid);
    const double mr = rendered[ir];
    const double mt = target[it];
    if (!(mr > 0) || !(mt > 0)) return out;
    const double inv_n = 1.0 / static_cast<double>(valid.size());
    double sum = 0, median_grad = 0;
    for (std::size_t i : valid) {
        const double d = rendered[i] / mr - target[i] / mt;
        sum += std::abs(d);
        const double sgn = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        out.grad[i] += static_cast<Real>(inv_n * sgn / mr);
        median_grad -= inv_n * sgn * rendered[i] / (mr * mr);
    }
    out.grad[ir] += static_cast<Real>(median_grad);
    out.value = static_cast<Real>(sum * inv_n);
    return out;
}

namespace {

Vec3 backproject(const Camera& cam, int x, int y, Real z) {
    return Vec3(z * ((x + Real(0.5)) - cam.cx) / cam.fx, z * ((y + Real(0.5)) - cam.cy) / cam.fy, z);
}

Vec3 backproject_dz(const Camera& cam, int x, int y) { return backproject(cam, x, y, 1); }

struct DepthNormal {
    Vec3 raw;      // cross(dy, dx), oriented
    Vec3 normal;   // raw / |raw|
    Real norm = 0;
};

DepthNormal depth_normal_impl(std::span<const Real> depth, const Camera& cam, int x, int y) {
    const int w = cam.width;
    const Vec3 p = backproject(cam, x, y, depth[static_cast<std::size_t>(y * w + x)]);
    const Vec3 px = backproject(cam, x + 1, y, depth[static_cast<std::size_t>(y * w + x + 1)]);
    const Vec3 py = backproject(cam, x, y + 1, depth[static_cast<std::size_t>((y + 1) * w + x)]);
    DepthNormal r;
    r.raw = (py - p).cross(px - p);
    if (r.raw.dot(p) > 0) r.raw = -r.raw;
    r.norm = r.raw.norm();
    r.normal = r.norm > 0 ? Vec3(r.raw / r.norm) : Vec3::Zero();
    return r;
}

}  // namespace

Vec3 depth_normal_at(std::span<const Real> depth, const Camera& camera, int x, int y) {
    if (x < 0 || y < 0 || x + 1 >= camera.width || y + 1 >= camera.height)
        throw std::out_of_range("depth_normal_at: stencil outside image");
    return depth_normal_impl(depth, camera, x, y).normal;
}

NormalLossValue loss_normal(std::span<const Real> normals, std::span<const Real> depth, std::span<const Real> alpha,
                            const Camera& cam) {
    const int w = cam.width, h = cam.height;
    const std::size_t np = static_cast<std::size_t>(w) * h;
    if (normals.size() != np * 3 || depth.size() != np || alpha.size() != np)
        throw std::invalid_argument("loss_normal: size mismatch");
    NormalLossValue out;
    out.grad_normal.assign(normals.size(), 0);
    out.grad_depth.assign(depth.size(), 0);
    auto ok = [&](int x, int y) { return alpha[static_cast<std::size_t>(y * w + x)] > Real(0.5); };
    std::vector<std::pair<int, int>> pix;
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x + 1 < w; ++x)
            if (ok(x, y) && ok(x + 1, y) && ok(x, y + 1)) pix.emplace_back(x, y);
    if (pix.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(pix.size());
    double sum = 0;
    for (auto [x, y] : pix) {
        const std::size_t i = static_cast<std::size_t>(y * w + x);
        const Vec3 n = Vec3(normals[3 * i], normals[3 * i + 1], normals[3 * i + 2]);
        const DepthNormal dn = depth_normal_impl(depth, cam, x, y);
        if (dn.norm <= 0) continue;
        sum += 1.0 - n.dot(dn.normal);
        const Real g = static_cast<Real>(-inv_n);
        for (int k = 0; k < 3; ++k) out.grad_normal[3 * i + k] += g * dn.normal[k];
        // Back through normalisation, orientation and cross product.
        const Vec3 g_unit = g * n;
        Vec3 g_raw = normalize_backward(dn.raw, g_unit);
        const Vec3 p = backproject(cam, x, y, depth[i]);
        const Vec3 unflipped = (backproject(cam, x, y + 1, depth[i + w]) - p).cross(
            backproject(cam, x + 1, y, depth[i + 1]) - p);
        if (unflipped.dot(dn.raw) < 0) g_raw = -g_raw;
        const Vec3 dy = backproject(cam, x, y + 1, depth[i + w]) - p;
        const Vec3 dx = backproject(cam, x + 1, y, depth[i + 1]) - p;
        // raw = dy x dx:  d/d dy = dx x g, d/d dx = g x dy
        const Vec3 g_dy = dx.cross(g_raw);
        const Vec3 g_dx = g_raw.cross(dy);
        out.grad_depth[i + w] += g_dy.dot(backproject_dz(cam, x, y + 1));
        out.grad_depth[i + 1] += g_dx.dot(backproject_dz(cam, x + 1, y));
        out.grad_depth[i] -= (g_dy + g_dx).dot(backproject_dz(cam, x, y));
    }
    out.value = static_cast<Real>(sum * inv_n);
    return out;
}

DiffuseLossValue loss_diffuse(std::span<const Real> multipliers, std::span<const Vec3> albedos) {
    if (multipliers.size() != albedos.size()) throw std::invalid_argument("loss_diffuse: size mismatch");
    DiffuseLossValue out;
    out.grad_multiplier.assign(multipliers.size(), 0);
    out.grad_albedo.assign(albedos.size(), Vec3::Zero());
    if (multipliers.empty()) return out;
    const Real inv_n = Real(1) / static_cast<Real>(multipliers.size());
    const Real inv_pi2 = Real(1) / (kPi * kPi);
    double sum = 0;
    for (std::size_t i = 0; i < multipliers.size(); ++i) {
        const Real dm = multipliers[i] - 1;
        const Real a2 = albedos[i].squaredNorm();
        sum += static_cast<double>(dm * dm * a2 * inv_pi2);
        out.grad_multiplier[i] = 2 * dm * a2 * inv_pi2 * inv_n;
        out.grad_albedo[i] = 2 * dm * dm * inv_pi2 * inv_n * albedos[i];
    }
    out.value = static_cast<Real>(sum) * inv_n;
    return out;
}

TissueLossValue loss_tissue(std::span<const Vec3> albedo, std::span<const Real> roughness, std::span<const Real> f0) {
    if (albedo.size() != roughness.size() || albedo.size() != f0.size())
        throw std::invalid_argument("loss_tissue: size mismatch");
    TissueLossValue out;
    const std::size_t n = albedo.size();
    out.grad_albedo.assign(n, Vec3::Zero());
    out.grad_roughness.assign(n, 0);
    out.grad_f0.assign(n, 0);
    if (n == 0) return out;
    Eigen::Vector3d ma = Eigen::Vector3d::Zero();
    double mr = 0, mf = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += albedo[i].cast<double>();
        mr += roughness[i];
        mf += f0[i];
    }
    ma /= static_cast<double>(n);
    mr /= static_cast<double>(n);
    mf /= static_cast<double>(n);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d da = albedo[i].cast<double>() - ma;
        const double dr = roughness[i] - mr;
        const double df = f0[i] - mf;
        sum += da.squaredNorm() + dr * dr + df * df;
        // The centring term drops out because deviations sum to zero.
        out.grad_albedo[i] = (2 * da).cast<Real>();
        out.grad_roughness[i] = static_cast<Real>(2 * dr);
        out.grad_f0[i] = static_cast<Real>(2 * df);
    }
    out.value = static_cast<Real>(sum);
    return out;
}

TissueLossValue loss_tissue(std::span<const Splat> splats) {
    std::vector<Vec3> a;
    std::vector<Real> r, f;
    a.reserve(splats.size());
    r.reserve(splats.size());
    f.reserve(splats.size());
    for (const auto& s : splats) {
        a.push_back(s.albedo());
        r.push_back(s.roughness());
        f.push_back(s.f0());
    }
    return loss_tissue(a, r, f);
}

Real total_loss(const LossTerms& t, const LossWeights& w) {
    return w.rgb * t.rgb + w.dssim * t.dssim + w.depth * t.depth + w.normal * t.normal + w.diffuse * t.diffuse +
           w.tissue * t.tissue;
}

Real psnr(std::span<const Real> a, std::span<const Real> b, Real cap) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("psnr: size mismatch");
    double se = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse <= 0) return cap;
    return static_cast<Real>(std::min<double>(cap, -10.0 * std::log10(mse)));
}

}  // namespace lumen::inline LUMEN_ABI
