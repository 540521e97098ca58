// SPDX-License-Identifier: Apache-2.0
#include "acceptance/precise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lumen/raster.hpp"
#include "lumen/shading.hpp"
#include "support/oracle.hpp"

#if !LUMEN_USE_DOUBLE
#error "precise measurements must be compiled against the double-precision core"
#endif

namespace precise {

using namespace lumen;

OracleStats oracle_equivalence(int scenes, std::uint64_t seed) {
    OracleStats st;
    st.scenes = scenes;
    Camera cam;
    cam.width = cam.height = 32;
    cam.fx = cam.fy = 30;
    cam.cx = cam.cy = 16;
    RasterSettings rs;
    rs.threads = 1;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> count(1, 64);
    std::uniform_real_distribution<double> u(-1, 1);
    const int channels = 7;
    for (int s = 0; s < scenes; ++s) {
        const int n = count(rng);
        st.max_splats = std::max(st.max_splats, n);
        const std::vector<Splat> splats = oracle::random_splats(rng, n);
        std::vector<double> payload(splats.size() * channels);
        for (auto& p : payload) p = u(rng);
        std::vector<ProjectedSplat> projected;
        std::vector<Real> packed;
        for (std::size_t i = 0; i < splats.size(); ++i) {
            auto p = project_gaussian(splats[i], cam, rs);
            if (!p) continue;
            p->source = static_cast<std::uint32_t>(i);
            projected.push_back(*p);
            for (int k = 0; k < channels; ++k) packed.push_back(payload[i * channels + k]);
        }
        const RasterResult got = rasterize_forward(projected, packed, channels, cam, rs);
        std::vector<double> alpha;
        const std::vector<double> want = oracle::naive_render(splats, payload, channels, cam, rs, &alpha);
        for (std::size_t i = 0; i < want.size(); ++i) st.worst = std::max(st.worst, std::abs(got.image[i] - want[i]));
        for (std::size_t i = 0; i < alpha.size(); ++i)
            st.worst = std::max(st.worst, std::abs(got.alpha[i] - alpha[i]));
    }
    return st;
}

namespace {

Vec3 unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0, 1);
    return Vec3(g(rng), g(rng), g(rng)).normalized();
}

Vec3 hemisphere(std::mt19937_64& rng, const Vec3& n) {
    while (true) {
        const Vec3 v = unit(rng);
        if (v.dot(n) > 0.02) return v;
    }
}

ShadingInputs random_inputs(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    ShadingInputs in;
    in.normal = unit(rng);
    in.light_dir = hemisphere(rng, in.normal);
    in.view_dir = hemisphere(rng, in.normal);
    in.distance = 0.5 + 3 * u(rng);
    in.albedo = Vec3(u(rng), u(rng), u(rng));
    in.roughness = 0.1 + 0.9 * u(rng);
    in.f0 = 0.08 * u(rng);
    in.forward = Vec3(0, 0, 1);
    return in;
}

}  // namespace

BrdfStats brdf_properties(std::uint64_t seed) {
    BrdfStats st;
    for (double r : {0.2, 0.5, 0.9}) {
        // Integral of D(h) (n.h) over the hemisphere with u = cos^2 theta.
        const int n = 200000;
        double sum = 0;
        for (int i = 0; i < n; ++i) sum += ggx_d(std::sqrt((i + 0.5) / n), r) * kPi / n;
        st.ggx_norm_error = std::max(st.ggx_norm_error, std::abs(sum - 1));
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    LightRig rig;
    rig.atten_coeffs = Vec3(1, 0.1, 0.05);
    rig.spot_inner = rig.spot_outer = kPi;
    for (int t = 0; t < 2000; ++t) {
        ShadingInputs in = random_inputs(rng);
        ShadingInputs swapped = in;
        std::swap(swapped.light_dir, swapped.view_dir);
        const double a = specular_term(in), b = specular_term(swapped);
        st.helmholtz = std::max(st.helmholtz, std::abs(a - b) / std::max(1.0, std::abs(a)));

        rig.intensity = Vec3::Ones();
        const Vec3 base = relight_color(in, classic_diffuse(in.albedo), rig);
        rig.intensity = Vec3(0.1 + 5 * u(rng), 0.1 + 5 * u(rng), 0.1 + 5 * u(rng));
        const Vec3 scaled = relight_color(in, classic_diffuse(in.albedo), rig);
        for (int k = 0; k < 3; ++k) {
            const double want = base[k] * rig.intensity[k];
            st.linearity = std::max(st.linearity, std::abs(scaled[k] - want) / std::max(std::abs(want), 1e-300));
        }

        ShadingInputs away = in;
        away.light_dir = -hemisphere(rng, in.normal);
        if (t % 4 == 0) away.light_dir = (away.light_dir - away.light_dir.dot(in.normal) * in.normal).normalized();
        if (away.light_dir.dot(in.normal) <= 0)
            st.backface = std::max(st.backface, relight_color(away, classic_diffuse(in.albedo), rig).cwiseAbs().maxCoeff());
    }
    return st;
}

}  // namespace precise
