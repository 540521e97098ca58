// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "lumen/losses.hpp"

using namespace lumen;

namespace {

std::vector<Real> random_image(std::mt19937_64& rng, std::size_t n, double lo = 0, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Real> v(n);
    for (auto& x : v) x = Real(u(rng));
    return v;
}

// Direct windowed SSIM: every pixel sums its 11x11 neighbourhood, outside
// pixels count as zero.
double brute_ssim(const std::vector<Real>& a, const std::vector<Real>& b, int w, int h, int c) {
    const int r = 5;
    const double sigma = 1.5;
    double wsum = 0;
    double win[11][11];
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) wsum += win[dy + r][dx + r] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                        const double k = win[dy + r][dx + r] / wsum;
                        const double va = a[(yy * w + xx) * c + ch], vb = b[(yy * w + xx) * c + ch];
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                const double vaa = saa - ma * ma, vbb = sbb - mb * mb, vab = sab - ma * mb;
                total += (2 * ma * mb + c1) * (2 * vab + c2) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
            }
    return total / (double(w) * h * c);
}

Camera small_camera(int w, int h) {
    Camera cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = Real(w);
    cam.cx = Real(w) / 2;
    cam.cy = Real(h) / 2;
    return cam;
}

}  // namespace

TEST_CASE("L1 loss and its gradient") {
    const std::vector<Real> a = {1, 2, 3, 4}, b = {2, 2, 1, 5};
    const LossValue l = loss_rgb(a, b);
    CHECK(l.value == doctest::Approx(1.0));
    CHECK(l.grad == std::vector<Real>{Real(-0.25), 0, Real(0.25), Real(-0.25)});
    CHECK_THROWS(loss_rgb(a, std::vector<Real>{1, 2}));
}

TEST_CASE("SSIM matches a brute-force windowed evaluation") {
    std::mt19937_64 rng(1);
    const int w = 19, h = 13, c = 3;
    const auto a = random_image(rng, std::size_t(w) * h * c);
    auto b = a;
    for (auto& x : b) x = std::clamp(x + Real(0.2) * Real(std::sin(13 * x)), Real(0), Real(1));
    CHECK(ssim(a, b, w, h, c) == doctest::Approx(brute_ssim(a, b, w, h, c)).epsilon(1e-5));
    CHECK(ssim(a, a, w, h, c) == doctest::Approx(1).epsilon(1e-6));
}

TEST_CASE("D-SSIM gradient matches finite differences") {
    std::mt19937_64 rng(2);
    const int w = 12, h = 10, c = 2;
    auto a = random_image(rng, std::size_t(w) * h * c);
    const auto b = random_image(rng, std::size_t(w) * h * c);
    const LossValue l = loss_dssim(a, b, w, h, c);
    CHECK(l.value == doctest::Approx((1 - ssim(a, b, w, h, c)) / 2).epsilon(1e-6));
    const Real step = Real(1e-2);
    for (std::size_t i = 0; i < a.size(); i += 7) {
        auto p = a, m = a;
        p[i] += step;
        m[i] -= step;
        const double fd = (loss_dssim(p, b, w, h, c).value - loss_dssim(m, b, w, h, c).value) / (2 * step);
        CHECK(l.grad[i] == doctest::Approx(fd).epsilon(3e-2).scale(1e-4));
    }
}

TEST_CASE("depth loss ignores a global scale and masked pixels") {
    std::mt19937_64 rng(3);
    const auto target = random_image(rng, 50, 1, 4);
    std::vector<Real> alpha(50, 1);
    std::vector<Real> scaled = target;
    for (auto& d : scaled) d *= Real(2.5);
    CHECK(std::abs(loss_depth(scaled, target, alpha).value) < 1e-6);

    auto rendered = random_image(rng, 50, 1, 4);
    const Real before = loss_depth(rendered, target, alpha).value;
    CHECK(before > 0);
    alpha[7] = Real(0.2);
    auto changed = rendered;
    changed[7] = 100;
    CHECK(loss_depth(changed, target, alpha).value == loss_depth(rendered, target, alpha).value);
    auto no_target = target;
    no_target[3] = 0;
    CHECK_NOTHROW(loss_depth(rendered, no_target, alpha));
}

TEST_CASE("depth loss gradient matches finite differences away from the median") {
    std::mt19937_64 rng(4);
    const auto target = random_image(rng, 31, 1, 4);
    auto rendered = random_image(rng, 31, 1, 4);
    const std::vector<Real> alpha(31, 1);
    const LossValue l = loss_depth(rendered, target, alpha);
    const Real h = Real(1e-4);
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        auto p = rendered, m = rendered;
        p[i] += h;
        m[i] -= h;
        const double fd = (double(loss_depth(p, target, alpha).value) - loss_depth(m, target, alpha).value) / (2 * h);
        CHECK(l.grad[i] == doctest::Approx(fd).epsilon(5e-2).scale(2e-3));
    }
}

TEST_CASE("normal from the depth of a tilted plane is the plane normal") {
    const int w = 20, h = 16;
    const Camera cam = small_camera(w, h);
    // Plane n . x = d seen along +z.
    const Eigen::Vector3d n = Eigen::Vector3d(0.3, -0.2, -1).normalized();
    const double d = -3;
    std::vector<Real> depth(std::size_t(w) * h), normals(std::size_t(w) * h * 3), alpha(std::size_t(w) * h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector3d ray((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1);
            depth[y * w + x] = Real(d / n.dot(ray));
            for (int k = 0; k < 3; ++k) normals[(y * w + x) * 3 + k] = Real(n[k]);
        }
    for (int y = 0; y + 1 < h; y += 3)
        for (int x = 0; x + 1 < w; x += 3) {
            const Vec3 got = depth_normal_at(depth, cam, x, y);
            CHECK(got.cast<double>().dot(n) == doctest::Approx(1).epsilon(1e-4));
        }
    const NormalLossValue l = loss_normal(normals, depth, alpha, cam);
    CHECK(std::abs(l.value) < 1e-6);
    std::vector<Real> flipped = normals;
    for (auto& v : flipped) v = -v;
    CHECK(loss_normal(flipped, depth, alpha, cam).value == doctest::Approx(2).epsilon(1e-3));
}

TEST_CASE("diffuse-multiplier loss vanishes at one and matches its gradient") {
    const std::vector<Real> m = {1, 1, 1};
    const std::vector<Vec3> a = {Vec3(Real(0.2), Real(0.5), Real(0.8)), Vec3::Constant(Real(0.4)), Vec3::Ones()};
    CHECK(loss_diffuse(m, a).value == 0);
    const std::vector<Real> m2 = {Real(1.5), Real(0.5), 1};
    const DiffuseLossValue l = loss_diffuse(m2, a);
    double want = 0;
    for (int i = 0; i < 3; ++i) want += std::pow((m2[i] - 1) / kPi, 2) * a[i].squaredNorm();
    CHECK(l.value == doctest::Approx(want / 3).epsilon(1e-5));
    CHECK(l.grad_multiplier[0] == doctest::Approx(2 * 0.5 / (kPi * kPi) * a[0].squaredNorm() / 3).epsilon(1e-5));
    CHECK(l.grad_multiplier[2] == 0);
}

TEST_CASE("tissue loss is zero for uniform materials and measures variance otherwise") {
    const std::vector<Vec3> same(10, Vec3(Real(0.7), Real(0.4), Real(0.3)));
    const std::vector<Real> r(10, Real(0.5)), f(10, Real(0.02));
    const TissueLossValue zero = loss_tissue(same, r, f);
    CHECK(zero.value == 0);
    for (const Vec3& g : zero.grad_albedo) CHECK(g.norm() == 0);

    std::vector<Vec3> mixed = same;
    mixed[0] = Vec3::Constant(Real(0.9));
    std::vector<Real> r2 = r;
    r2[3] = Real(0.8);
    const TissueLossValue l = loss_tissue(mixed, r2, f);
    double want = 0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& v : mixed) mean += v.cast<double>() / 10;
    for (const auto& v : mixed) want += (v.cast<double>() - mean).squaredNorm();
    const double rmean = (0.5 * 9 + 0.8) / 10;
    for (Real v : r2) want += std::pow(v - rmean, 2);
    CHECK(l.value == doctest::Approx(want).epsilon(1e-5));
    CHECK(l.grad_albedo[0].x() == doctest::Approx(2 * (0.9 - mean.x())).epsilon(1e-5));
    CHECK(l.grad_roughness[3] == doctest::Approx(2 * (0.8 - rmean)).epsilon(1e-5));
}

TEST_CASE("total loss weights its terms") {
    LossTerms t;
    t.rgb = 1;
    t.dssim = 2;
    t.depth = 3;
    t.normal = 4;
    t.diffuse = 5;
    t.tissue = 6;
    const LossWeights w;
    CHECK(total_loss(t, w) == doctest::Approx(0.8 + 0.4 + 1.5 + 0.4 + 0.05 + 0.06));
}

TEST_CASE("PSNR of a known error") {
    const std::vector<Real> a(100, Real(0.5));
    std::vector<Real> b(100, Real(0.6));
    CHECK(psnr(a, b) == doctest::Approx(20).epsilon(1e-4));
    CHECK(psnr(a, a) == 99);
}
