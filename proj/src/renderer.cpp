// SPDX-License-Identifier: Apache-2.0
#include "lumen/renderer.hpp"

#include <cmath>
#include <stdexcept>

namespace lumen::inline LUMEN_ABI {

const std::vector<Real>& RenderOutput::buffer(const std::string& name) const {
    if (name == "rgb") return rgb;
    if (name == "albedo") return albedo;
    if (name == "diffuse") return diffuse;
    if (name == "specular") return specular;
    if (name == "normal") return normal;
    if (name == "depth") return depth;
    if (name == "alpha") return alpha;
    throw std::invalid_argument("unknown buffer '" + name + "'");
}

SceneGradients SceneGradients::zeros_like(const SceneModel& scene) {
    const std::size_t n = scene.splats.size();
    SceneGradients g;
    g.position.assign(n, Vec3::Zero());
    g.rotation.assign(n, Vec4::Zero());
    g.log_scale.assign(n, Vec3::Zero());
    g.opacity_logit.assign(n, Real(0));
    g.albedo_logit.assign(n, Vec3::Zero());
    g.roughness_logit.assign(n, Real(0));
    g.f0_logit.assign(n, Real(0));
    g.mean2d_norm.assign(n, Real(0));
    g.mlp = MlpGrads::zeros_like(scene.mlp);
    if (scene.hash) g.hash_table.assign(scene.hash->table.size(), Real(0));
    return g;
}

bool SceneGradients::all_finite() const {
    auto finite_vecs = [](const auto& v) {
        for (const auto& x : v)
            if (!x.allFinite()) return false;
        return true;
    };
    auto finite_scalars = [](const std::vector<Real>& v) {
        for (Real x : v)
            if (!std::isfinite(x)) return false;
        return true;
    };
    if (!finite_vecs(position) || !finite_vecs(rotation) || !finite_vecs(log_scale) ||
        !finite_vecs(albedo_logit) || !finite_scalars(opacity_logit) || !finite_scalars(roughness_logit) ||
        !finite_scalars(f0_logit) || !finite_scalars(hash_table))
        return false;
    if (!light_offset.allFinite() || !light_intensity.allFinite() || !light_atten.allFinite() ||
        !std::isfinite(spot_inner) || !std::isfinite(spot_outer))
        return false;
    return finite_vecs(mlp.weights) && finite_vecs(mlp.biases);
}

Vec3 light_world_position(const LightRig& light, const Camera& camera) {
    return camera.center() + camera.rotation.transpose() * light.offset;
}

RenderOutput render_view(const SceneModel& scene, const Camera& camera, const RenderOptions& options,
                         ViewCache* cache) {
    return render_view(scene, scene.light, camera, options, cache);
}

RenderOutput render_view(const SceneModel& scene, const LightRig& light, const Camera& camera,
                         const RenderOptions& options, ViewCache* cache) {
    camera.validate();
    const int channels = options.decomposition ? kDecompChannels : kBaseChannels;
    const Vec3 forward = options.light_forward ? options.light_forward->normalized() : Vec3::UnitZ();

    ViewCache local;
    ViewCache& vc = cache ? *cache : local;
    vc = ViewCache{};
    vc.channels = channels;
    vc.light = light;
    vc.light_world = light_world_position(light, camera);
    if (options.use_mlp && scene.hash) vc.hash_features = hashgrid_encode(*scene.hash, vc.light_world);

    vc.projected.reserve(scene.splats.size());
    vc.states.reserve(scene.splats.size());
    const Vec3 cam_center = camera.center();
    for (std::size_t i = 0; i < scene.splats.size(); ++i) {
        const Splat& s = scene.splats[i];
        auto proj = project_gaussian(s, camera, options.raster);
        if (!proj) continue;
        proj->source = static_cast<std::uint32_t>(i);
        vc.projected.push_back(*proj);

        SplatShadingState st;
        st.source = static_cast<std::uint32_t>(i);
        st.cam_pos = camera.to_camera(s.position);
        st.to_light = light.offset - st.cam_pos;
        const Vec3 axis = splat_axis_normal(s);
        st.normal_sign = axis.dot(cam_center - s.position) < 0 ? Real(-1) : Real(1);
        ShadingInputs& in = st.inputs;
        in.normal = st.normal_sign * (camera.rotation * axis);
        in.distance = st.to_light.norm();
        in.light_dir = st.to_light / in.distance;
        in.view_dir = -st.cam_pos.normalized();
        in.albedo = s.albedo();
        in.roughness = s.roughness();
        in.f0 = s.f0();
        in.forward = forward;
        vc.states.push_back(st);
    }

    const std::size_t n_vis = vc.states.size();
    if (options.use_mlp) {
        std::mt19937_64 rng(options.noise_seed);
        MatX inputs(scene.mlp.input_dim(), static_cast<Eigen::Index>(n_vis));
        for (std::size_t k = 0; k < n_vis; ++k) {
            auto& st = vc.states[k];
            NoisyInputs ni{st.inputs.light_dir, st.inputs.distance, st.inputs.normal};
            if (options.noise_sigma > 0) {
                st.noise = draw_noise(options.noise_sigma, rng);
                ni = apply_noise(st.inputs.light_dir, st.inputs.distance, st.inputs.normal, st.noise);
            }
            write_mlp_input(ni.light_dir, ni.distance, ni.normal, vc.hash_features,
                            scene.mlp.distance_scale, inputs.col(static_cast<Eigen::Index>(k)));
        }
        vc.mlp = mlp_forward_batch(scene.mlp, std::move(inputs));
        for (std::size_t k = 0; k < n_vis; ++k) vc.states[k].multiplier = vc.mlp.multiplier[static_cast<Eigen::Index>(k)];
    }

    vc.payload.assign(n_vis * channels, Real(0));
    for (std::size_t k = 0; k < n_vis; ++k) {
        const auto& st = vc.states[k];
        const Vec3 mlp_diffuse = st.multiplier * classic_diffuse(st.inputs.albedo);
        const ShadedColor sc = shade(st.inputs, mlp_diffuse, light);
        Real* p = vc.payload.data() + k * channels;
        for (int c = 0; c < 3; ++c) {
            p[kChanRgb + c] = sc.rgb[c];
            p[kChanNormal + c] = st.inputs.normal[c];
        }
        p[kChanDepth] = st.cam_pos.z();
        if (options.decomposition) {
            for (int c = 0; c < 3; ++c) {
                p[kChanAlbedo + c] = st.inputs.albedo[c];
                p[kChanDiffuse + c] = sc.diffuse[c];
                p[kChanSpecular + c] = sc.specular[c];
            }
        }
    }

    vc.raster = rasterize_forward(vc.projected, vc.payload, channels, camera, options.raster);

    RenderOutput out;
    out.width = camera.width;
    out.height = camera.height;
    const std::size_t n_pix = out.pixel_count();
    out.rgb.resize(n_pix * 3);
    out.normal.resize(n_pix * 3);
    out.depth.resize(n_pix);
    out.alpha = vc.raster.alpha;
    if (options.decomposition) {
        out.albedo.resize(n_pix * 3);
        out.diffuse.resize(n_pix * 3);
        out.specular.resize(n_pix * 3);
    }
    for (std::size_t px = 0; px < n_pix; ++px) {
        const Real* img = vc.raster.image.data() + px * channels;
        Vec3 n(img[kChanNormal], img[kChanNormal + 1], img[kChanNormal + 2]);
        const Real len = n.norm();
        if (len > 0) n /= len;
        for (int c = 0; c < 3; ++c) {
            out.rgb[px * 3 + c] = img[kChanRgb + c];
            out.normal[px * 3 + c] = n[c];
        }
        out.depth[px] = img[kChanDepth];
        if (options.decomposition) {
            for (int c = 0; c < 3; ++c) {
                out.albedo[px * 3 + c] = img[kChanAlbedo + c];
                out.diffuse[px * 3 + c] = img[kChanDiffuse + c];
                out.specular[px * 3 + c] = img[kChanSpecular + c];
            }
        }
    }
    return out;
}

void render_backward(const SceneModel& scene, const Camera& camera, const RenderOptions& options,
                     const ViewCache& cache, const OutputGrads& upstream, SceneGradients& grads) {
    const int channels = cache.channels;
    const std::size_t n_pix = static_cast<std::size_t>(camera.width) * camera.height;
    if (cache.raster.image.size() != n_pix * static_cast<std::size_t>(channels) ||
        grads.position.size() != scene.splats.size()) {
        throw std::invalid_argument("render_backward: cache does not match scene/camera");
    }
    auto check = [n_pix](const std::vector<Real>& v, std::size_t per_pixel, const char* name) {
        if (!v.empty() && v.size() != n_pix * per_pixel)
            throw std::invalid_argument(std::string("render_backward: bad gradient size for ") + name);
    };
    check(upstream.rgb, 3, "rgb");
    check(upstream.depth, 1, "depth");
    check(upstream.normal, 3, "normal");
    if (!upstream.multiplier.empty() && upstream.multiplier.size() != cache.states.size())
        throw std::invalid_argument("render_backward: bad gradient size for multiplier");

    std::vector<Real> grad_image(n_pix * channels, Real(0));
    for (std::size_t px = 0; px < n_pix; ++px) {
        Real* g = grad_image.data() + px * channels;
        if (!upstream.rgb.empty())
            for (int c = 0; c < 3; ++c) g[kChanRgb + c] = upstream.rgb[px * 3 + c];
        if (!upstream.depth.empty()) g[kChanDepth] = upstream.depth[px];
        if (!upstream.normal.empty()) {
            const Real* img = cache.raster.image.data() + px * channels;
            const Vec3 raw(img[kChanNormal], img[kChanNormal + 1], img[kChanNormal + 2]);
            if (raw.norm() > 0) {
                const Vec3 gn(upstream.normal[px * 3], upstream.normal[px * 3 + 1], upstream.normal[px * 3 + 2]);
                const Vec3 graw = normalize_backward(raw, gn);
                for (int c = 0; c < 3; ++c) g[kChanNormal + c] = graw[c];
            }
        }
    }

    const RasterGrad rg = rasterize_backward(cache.projected, cache.payload, cache.raster, grad_image, options.raster);
    const LightRig& light = cache.light;
    const std::size_t n_vis = cache.states.size();

    // Shading, collecting dLoss/dmultiplier for the network.
    std::vector<ShadingGrad> sgrad(n_vis);
    RowVecX grad_mult = RowVecX::Zero(static_cast<Eigen::Index>(n_vis));
    for (std::size_t k = 0; k < n_vis; ++k) {
        const auto& st = cache.states[k];
        const Real* gp = rg.payload.data() + k * channels;
        const Vec3 g_rgb(gp[kChanRgb], gp[kChanRgb + 1], gp[kChanRgb + 2]);
        const Vec3 classic = classic_diffuse(st.inputs.albedo);
        sgrad[k] = relight_color_backward(st.inputs, st.multiplier * classic, light, g_rgb);
        grad_mult[static_cast<Eigen::Index>(k)] = sgrad[k].mlp_diffuse.dot(classic);
        if (!upstream.multiplier.empty()) grad_mult[static_cast<Eigen::Index>(k)] += upstream.multiplier[k];
    }

    MatX grad_inputs;
    if (options.use_mlp && n_vis > 0) grad_inputs = mlp_backward_batch(scene.mlp, cache.mlp, grad_mult, grads.mlp);

    std::vector<Real> grad_hash(cache.hash_features.size(), Real(0));
    Vec3 grad_light_cam = Vec3::Zero();
    const Mat3& W = camera.rotation;
    const Real inv_pi = Real(1) / static_cast<Real>(kPi);

    for (std::size_t k = 0; k < n_vis; ++k) {
        const auto& st = cache.states[k];
        const std::uint32_t i = st.source;
        const Splat& s = scene.splats[i];
        const ShadingGrad& sg = sgrad[k];
        const Real* gp = rg.payload.data() + k * channels;

        Vec3 g_l = sg.light_dir;
        Real g_d = sg.distance;
        Vec3 g_n = sg.normal + Vec3(gp[kChanNormal], gp[kChanNormal + 1], gp[kChanNormal + 2]);
        Vec3 g_c = sg.view_dir;

        if (options.use_mlp) {
            const auto col = grad_inputs.col(static_cast<Eigen::Index>(k));
            NoisyInputs ni{st.inputs.light_dir, st.inputs.distance, st.inputs.normal};
            if (options.noise_sigma > 0)
                ni = apply_noise(st.inputs.light_dir, st.inputs.distance, st.inputs.normal, st.noise);
            Vec3 g_ln = Vec3(col[0], col[1], col[2]) + col[7] * ni.normal;
            Vec3 g_nn = Vec3(col[4], col[5], col[6]) + col[7] * ni.light_dir;
            Real g_dn = col[3] / scene.mlp.distance_scale;
            for (std::size_t h = 0; h < grad_hash.size(); ++h)
                grad_hash[h] += col[kMlpGeometricInputs + static_cast<Eigen::Index>(h)];
            if (options.noise_sigma > 0) {
                g_ln = normalize_backward(st.inputs.light_dir + st.noise.light_dir, g_ln);
                g_nn = normalize_backward(st.inputs.normal + st.noise.normal, g_nn);
                g_dn *= (Real(1) + st.noise.distance);
            }
            g_l += g_ln;
            g_n += g_nn;
            g_d += g_dn;
        }

        // l = to_light / |to_light|, d = |to_light|, to_light = offset - cam_pos
        const Vec3 g_to_light = normalize_backward(st.to_light, g_l) + st.inputs.light_dir * g_d;
        grad_light_cam += g_to_light;
        Vec3 g_cam = -g_to_light;
        // c = normalize(-cam_pos)
        g_cam -= normalize_backward(-st.cam_pos, g_c);
        g_cam.z() += gp[kChanDepth];

        // n = sign * W * R[:, flat]
        Mat3 g_r = Mat3::Zero();
        g_r.col(s.flat_axis()) = st.normal_sign * (W.transpose() * g_n);
        grads.rotation[i] += quat_to_matrix_backward(s.rotation, g_r);
        grads.position[i] += W.transpose() * g_cam;

        const Vec2 g_mean = rg.mean2d[k];
        const ProjectionGrad pg = project_gaussian_backward(s, camera, options.raster, g_mean, rg.conic[k]);
        grads.position[i] += pg.position;
        grads.rotation[i] += pg.rotation;
        grads.log_scale[i] += pg.log_scale;
        grads.mean2d_norm[i] += g_mean.norm();

        const Real op = cache.projected[k].opacity;
        grads.opacity_logit[i] += rg.opacity[k] * op * (1 - op);

        // mlp_diffuse = m * a / pi
        const Vec3 g_albedo = sg.mlp_diffuse * (st.multiplier * inv_pi);
        const Vec3 a = st.inputs.albedo;
        grads.albedo_logit[i] += g_albedo.cwiseProduct(a).cwiseProduct(Vec3::Ones() - a);
        const Real r = st.inputs.roughness;
        grads.roughness_logit[i] += sg.roughness * r * (1 - r);
        const Real f0_sig = st.inputs.f0 / kMaxF0;
        grads.f0_logit[i] += sg.f0 * kMaxF0 * f0_sig * (1 - f0_sig);

        grads.light_intensity += sg.intensity;
        grads.light_atten += sg.atten_coeffs;
        grads.spot_inner += sg.spot_inner;
        grads.spot_outer += sg.spot_outer;
    }

    grads.light_offset += grad_light_cam;
    if (options.use_mlp && scene.hash && n_vis > 0) {
        const Vec3 g_world = hashgrid_backward(*scene.hash, cache.light_world, grad_hash, grads.hash_table);
        // light_world = center + W^T offset
        grads.light_offset += W * g_world;
    }
}

}  // namespace lumen::inline LUMEN_ABI
