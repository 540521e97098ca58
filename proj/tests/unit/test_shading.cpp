// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "lumen/neural.hpp"
#include "lumen/shading.hpp"

using namespace lumen;

namespace {

// Closed forms written out directly in double, with the same denominator
// guard the shading code adds.
double ref_ggx(double nh, double r) {
    const double a2 = std::pow(r, 4);
    const double den = nh * nh * (a2 - 1) + 1;
    return a2 / (kPi * den * den + kShadeEps);
}

double ref_fresnel(double hc, double f0) { return f0 + (1 - f0) * std::pow(1 - hc, 5); }

double ref_g(double nl, double nc, double r) {
    const double k = r * r / 2;
    return nl / (nl * (1 - k) + k + kShadeEps) * nc / (nc * (1 - k) + k + kShadeEps);
}

Vec3 unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0, 1);
    return Vec3(Real(g(rng)), Real(g(rng)), Real(g(rng))).normalized();
}

Vec3 hemisphere(std::mt19937_64& rng, const Vec3& n) {
    while (true) {
        const Vec3 v = unit(rng);
        if (v.dot(n) > Real(0.05)) return v;
    }
}

ShadingInputs random_inputs(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    ShadingInputs in;
    in.normal = unit(rng);
    in.light_dir = hemisphere(rng, in.normal);
    in.view_dir = hemisphere(rng, in.normal);
    in.distance = Real(0.5 + 3 * u(rng));
    in.albedo = Vec3(Real(u(rng)), Real(u(rng)), Real(u(rng)));
    in.roughness = Real(0.15 + 0.8 * u(rng));
    in.f0 = Real(0.03 * u(rng));
    in.forward = Vec3(0, 0, 1);
    return in;
}

LightRig bright_rig() {
    LightRig rig;
    rig.intensity = Vec3(2, 3, 4);
    rig.atten_coeffs = Vec3(1, Real(0.1), Real(0.05));
    return rig;
}

}  // namespace

TEST_CASE("GGX, Fresnel and shadowing match their closed forms") {
    for (double r : {0.1, 0.3, 0.6, 0.95})
        for (double x : {0.05, 0.3, 0.7, 0.999}) {
            CHECK(ggx_d(Real(x), Real(r)) == doctest::Approx(ref_ggx(x, r)).epsilon(1e-4));
            CHECK(fresnel_schlick(Real(x), Real(0.02)) == doctest::Approx(ref_fresnel(x, 0.02)).epsilon(1e-5));
            CHECK(geometry_schlick_beckmann(Real(x), Real(0.5), Real(r)) ==
                  doctest::Approx(ref_g(x, 0.5, r)).epsilon(1e-4));
        }
    CHECK(fresnel_schlick(1, Real(0.02)) == doctest::Approx(0.02));
    CHECK(fresnel_schlick(0, Real(0.02)) == doctest::Approx(1));
}

TEST_CASE("shading partial derivatives agree with central differences") {
    const double h = 1e-3;
    for (double r : {0.2, 0.5, 0.8})
        for (double x : {0.2, 0.5, 0.9}) {
            const auto d = ggx_d_partials(Real(x), Real(r));
            CHECK(d.d0 == doctest::Approx((ref_ggx(x + h, r) - ref_ggx(x - h, r)) / (2 * h)).epsilon(2e-3));
            CHECK(d.d1 == doctest::Approx((ref_ggx(x, r + h) - ref_ggx(x, r - h)) / (2 * h)).epsilon(2e-3));
            const auto f = fresnel_schlick_partials(Real(x), Real(0.02));
            CHECK(f.d0 == doctest::Approx((ref_fresnel(x + h, 0.02) - ref_fresnel(x - h, 0.02)) / (2 * h)).epsilon(2e-3));
            CHECK(f.d1 == doctest::Approx(1 - std::pow(1 - x, 5)).epsilon(1e-4));
            const auto g = geometry_schlick_beckmann_partials(Real(x), Real(0.6), Real(r));
            CHECK(g.d0 == doctest::Approx((ref_g(x + h, 0.6, r) - ref_g(x - h, 0.6, r)) / (2 * h)).epsilon(2e-3));
            CHECK(g.d1 == doctest::Approx((ref_g(x, 0.6 + h, r) - ref_g(x, 0.6 - h, r)) / (2 * h)).epsilon(2e-3));
            CHECK(g.d2 == doctest::Approx((ref_g(x, 0.6, r + h) - ref_g(x, 0.6, r - h)) / (2 * h)).epsilon(2e-3));
        }
}

TEST_CASE("GGX distribution integrates to one against n.h") {
    for (double r : {0.2, 0.5, 0.9}) {
        // Integrate in the substitution u = cos^2 theta for accuracy at low roughness.
        const int n = 20000;
        double sum = 0;
        for (int i = 0; i < n; ++i) {
            const double u = (i + 0.5) / n;
            // d omega = 2 pi sin theta d theta, cos theta d(cos theta) = du / 2
            sum += ggx_d(Real(std::sqrt(u)), Real(r)) * kPi / n;
        }
        CHECK(sum == doctest::Approx(1).epsilon(0.01));
    }
}

TEST_CASE("specular term is symmetric in light and view directions") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 500; ++t) {
        ShadingInputs in = random_inputs(rng);
        ShadingInputs swapped = in;
        std::swap(swapped.light_dir, swapped.view_dir);
        const Real a = specular_term(in), b = specular_term(swapped);
        CHECK(std::abs(a - b) <= 2e-5 * std::max(Real(1), std::abs(a)));
    }
}

TEST_CASE("no light reaches surfaces facing away from it") {
    std::mt19937_64 rng(4);
    const LightRig rig = bright_rig();
    for (int t = 0; t < 300; ++t) {
        ShadingInputs in = random_inputs(rng);
        in.light_dir = -hemisphere(rng, in.normal);
        const ShadedColor c = shade(in, classic_diffuse(in.albedo), rig);
        CHECK(c.rgb == Vec3::Zero());
        CHECK(c.diffuse == Vec3::Zero());
        CHECK(c.specular == Vec3::Zero());
    }
}

TEST_CASE("relit color is linear in the light intensity and splits into diffuse plus specular") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 300; ++t) {
        const ShadingInputs in = random_inputs(rng);
        LightRig rig = bright_rig();
        rig.intensity = Vec3(1, 1, 1);
        const Vec3 base = relight_color(in, classic_diffuse(in.albedo), rig);
        rig.intensity = Vec3(Real(2.5), Real(0.5), Real(7));
        const Vec3 scaled = relight_color(in, classic_diffuse(in.albedo), rig);
        CHECK((scaled - base.cwiseProduct(rig.intensity)).norm() <= 1e-5 * (1 + scaled.norm()));
        const ShadedColor c = shade(in, classic_diffuse(in.albedo), rig);
        CHECK((c.diffuse + c.specular - c.rgb).norm() == 0);
        CHECK((c.rgb - scaled).norm() <= 1e-6 * (1 + scaled.norm()));
    }
}

TEST_CASE("relit color matches an independent evaluation of the shading model") {
    std::mt19937_64 rng(6);
    const LightRig rig = bright_rig();
    for (int t = 0; t < 300; ++t) {
        const ShadingInputs in = random_inputs(rng);
        const Eigen::Vector3d l = in.light_dir.cast<double>(), c = in.view_dir.cast<double>(),
                              n = in.normal.cast<double>();
        const Eigen::Vector3d h = (l + c).normalized();
        const double nl = n.dot(l), nc = n.dot(c);
        const double f = ref_fresnel(h.dot(c), in.f0);
        const double spec = ref_ggx(n.dot(h), in.roughness) * f * ref_g(nl, nc, in.roughness) / (4 * nl * nc + kShadeEps);
        const double d = in.distance;
        const double att = 1.0 / (1 + 0.1 * d + 0.05 * d * d);
        const Vec3 got = relight_color(in, classic_diffuse(in.albedo), rig);
        for (int k = 0; k < 3; ++k) {
            const double want = rig.intensity[k] * att * (in.albedo[k] / kPi * (1 - f) + spec) * nl;
            CHECK(got[k] == doctest::Approx(want).epsilon(2e-4));
        }
    }
}

TEST_CASE("spotlight falloff is one inside, zero outside, monotone between") {
    LightRig rig;
    rig.spot_inner = Real(0.4);
    rig.spot_outer = Real(0.9);
    CHECK(spot_falloff(std::cos(Real(0.2)), rig) == 1);
    CHECK(spot_falloff(std::cos(Real(1.0)), rig) == 0);
    Real prev = 1;
    for (int i = 0; i <= 50; ++i) {
        const Real a = Real(0.4 + 0.5 * i / 50.0);
        const Real v = spot_falloff(std::cos(a), rig);
        CHECK(v <= prev + 1e-6);
        prev = v;
    }
    CHECK(spot_falloff(std::cos(Real(0.65)), rig) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(attenuation(2, Vec3(1, Real(0.5), Real(0.25))) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("fresh network outputs a multiplier of exactly one") {
    for (int hash_dim : {0, 8}) {
        const MlpParams mlp = make_mlp(hash_dim, 4, 17);
        CHECK(mlp.input_dim() == kMlpGeometricInputs + hash_dim);
        CHECK(mlp.layer_sizes.back() == 1);
        std::mt19937_64 rng(1);
        std::vector<Real> feats(hash_dim, Real(0.3));
        for (int t = 0; t < 50; ++t) {
            const Vec3 n = unit(rng);
            CHECK(mlp_forward(mlp, hemisphere(rng, n), Real(1 + t * 0.1), n, feats) == 1);
        }
    }
}

TEST_CASE("batched and single network evaluations agree") {
    MlpParams mlp = make_mlp(0, 4, 3, {16, 16});
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0, 1);
    for (auto& w : mlp.weights.back().reshaped()) w = Real(0.4 * g(rng));
    MatX inputs(kMlpGeometricInputs, 20);
    std::vector<Real> single;
    for (int c = 0; c < 20; ++c) {
        const Vec3 n = unit(rng), l = hemisphere(rng, n);
        const Real d = Real(0.5 + c * 0.2);
        write_mlp_input(l, d, n, {}, mlp.distance_scale, inputs.col(c));
        single.push_back(mlp_forward(mlp, l, d, n));
    }
    const MlpCache cache = mlp_forward_batch(mlp, inputs);
    for (int c = 0; c < 20; ++c) {
        CHECK(cache.multiplier[c] == doctest::Approx(single[c]).epsilon(1e-6));
        CHECK(cache.multiplier[c] > 0);
        CHECK(cache.multiplier[c] < 2);
    }
}

TEST_CASE("network backward matches finite differences") {
    // Identity hidden activations keep the objective smooth for float differences.
    MlpParams mlp = make_mlp(0, 4, 5, {8, 8}, Activation::Identity);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 1);
    for (auto& w : mlp.weights.back().reshaped()) w = Real(0.5 * g(rng));
    MatX inputs = MatX::Random(kMlpGeometricInputs, 6);
    RowVecX upstream = RowVecX::Random(6);
    const MlpCache cache = mlp_forward_batch(mlp, inputs);
    MlpGrads grads = MlpGrads::zeros_like(mlp);
    const MatX grad_in = mlp_backward_batch(mlp, cache, upstream, grads);
    auto objective = [&](const MlpParams& p, const MatX& x) {
        return static_cast<double>((mlp_forward_batch(p, x).multiplier.cwiseProduct(upstream)).sum());
    };
    const Real h = Real(1e-2);
    for (std::size_t k = 0; k < mlp.weights.size(); ++k)
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(mlp.weights[k].size(), 12); ++i) {
            MlpParams a = mlp, b = mlp;
            a.weights[k].data()[i] += h;
            b.weights[k].data()[i] -= h;
            const double fd = (objective(a, inputs) - objective(b, inputs)) / (2 * h);
            CHECK(grads.weights[k].data()[i] == doctest::Approx(fd).epsilon(2e-2).scale(1e-2));
        }
    for (Eigen::Index i = 0; i < inputs.size(); i += 5) {
        MatX a = inputs, b = inputs;
        a.data()[i] += h;
        b.data()[i] -= h;
        const double fd = (objective(mlp, a) - objective(mlp, b)) / (2 * h);
        CHECK(grad_in.data()[i] == doctest::Approx(fd).epsilon(2e-2).scale(1e-2));
    }
}

TEST_CASE("hash corner uses the xor of prime-multiplied coordinates") {
    const std::uint32_t t = 1u << 14;
    CHECK(hash_corner(0, 0, 0, t) == 0);
    CHECK(hash_corner(5, 0, 0, t) == 5);
    CHECK(hash_corner(0, 1, 0, t) == (2654435761u & (t - 1)));
    CHECK(hash_corner(3, 2, 7, t) == ((3u ^ (2u * 2654435761u) ^ (7u * 805459861u)) & (t - 1)));
}

TEST_CASE("hash encoding interpolates table entries and its backward matches finite differences") {
    HashGridParams grid = make_hashgrid(Vec3(-1, -1, -1), Vec3(1, 1, 1), 3, 3, 8, 2, 2, 2);
    CHECK(grid.table.size() == std::size_t(3) * 256 * 2);
    CHECK(grid.resolution(0) == 2);
    const Vec3 p(Real(0.13), Real(-0.41), Real(0.77));
    const auto f = hashgrid_encode(grid, p);
    CHECK(f.size() == 6);
    std::vector<Real> upstream = {1, -2, Real(0.5), 3, Real(-0.7), 1};
    std::vector<Real> gtable(grid.table.size(), 0);
    const Vec3 gpos = hashgrid_backward(grid, p, upstream, gtable);
    auto objective = [&](const HashGridParams& g, const Vec3& x) {
        const auto e = hashgrid_encode(g, x);
        double s = 0;
        for (std::size_t i = 0; i < e.size(); ++i) s += e[i] * upstream[i];
        return s;
    };
    // Encoding is linear in the table.
    for (std::size_t i = 0; i < grid.table.size(); i += 37) {
        HashGridParams a = grid;
        a.table[i] += 1;
        CHECK(objective(a, p) - objective(grid, p) == doctest::Approx(gtable[i]).epsilon(1e-4).scale(1e-4));
    }
    const Real h = Real(1e-3);
    for (int k = 0; k < 3; ++k) {
        Vec3 a = p, b = p;
        a[k] += h;
        b[k] -= h;
        CHECK(gpos[k] == doctest::Approx((objective(grid, a) - objective(grid, b)) / (2 * h)).epsilon(1e-2).scale(1e-3));
    }
}

TEST_CASE("input noise is zero-mean and renormalizes directions") {
    std::mt19937_64 rng(11);
    const Vec3 l = Vec3(0, 0, 1), n = Vec3(1, 0, 0);
    double mean_d = 0;
    for (int t = 0; t < 4000; ++t) {
        const NoisyInputs x = inject_noise(l, 2, n, Real(0.02), rng);
        CHECK(std::abs(x.light_dir.norm() - 1) < 1e-5);
        CHECK(std::abs(x.normal.norm() - 1) < 1e-5);
        mean_d += x.distance;
    }
    CHECK(mean_d / 4000 == doctest::Approx(2).epsilon(2e-3));
    const NoisyInputs same = inject_noise(l, 2, n, 0, rng);
    CHECK(same.light_dir == l);
    CHECK(same.distance == 2);
}
