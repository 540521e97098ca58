// SPDX-License-Identifier: Apache-2.0
#include "lumen/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <unordered_map>

#include "lumen/scene_io.hpp"

namespace lumen::inline LUMEN_ABI {

void AdamState::resize(std::size_t n) {
    m.assign(n, Real(0));
    v.assign(n, Real(0));
    step = 0;
}

void adam_update(std::span<Real> params, std::span<const Real> grads, AdamState& st, const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_update: size mismatch");
    if (st.m.size() != params.size()) {
        if (st.step != 0 || !st.m.empty()) throw std::invalid_argument("adam_update: state does not match parameters");
        st.resize(params.size());
    }
    ++st.step;
    const double bc1 = 1 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(st.step));
    const double bc2 = 1 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(st.step));
    const Real step_size = static_cast<Real>(cfg.lr / bc1);
    const Real inv_sqrt_bc2 = static_cast<Real>(1 / std::sqrt(bc2));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1 - cfg.beta1) * grads[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1 - cfg.beta2) * grads[i] * grads[i];
        params[i] -= step_size * st.m[i] / (std::sqrt(st.v[i]) * inv_sqrt_bc2 + cfg.eps);
    }
}

void TrainConfig::validate() const {
    if (iterations <= 0) throw std::invalid_argument("train: iterations must be > 0");
    const LossWeights& w = weights;
    for (Real x : {w.rgb, w.dssim, w.depth, w.normal, w.diffuse, w.tissue})
        if (!(x >= 0)) throw std::invalid_argument("train: loss weights must be >= 0");
    for (Real x : {lr.position, lr.rotation, lr.scale, lr.opacity, lr.material, lr.light, lr.mlp, lr.hash})
        if (!(x >= 0)) throw std::invalid_argument("train: learning rates must be >= 0");
    if (!(noise_sigma >= 0)) throw std::invalid_argument("train: noise sigma must be >= 0");
    if (log_every <= 0) throw std::invalid_argument("train: log_every must be > 0");
    if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every must be >= 0");
    if (densify.enabled && densify.interval <= 0) throw std::invalid_argument("train: densify interval must be > 0");
}

NumericError::NumericError(int it, std::string t)
    : std::runtime_error("non-finite " + t + " at iteration " + std::to_string(it)), iteration(it), term(std::move(t)) {}

std::string log_csv_header() { return "iteration,total,rgb,dssim,depth,normal,diffuse,tissue,test_psnr,splats\n"; }

std::string log_csv_row(const LogRow& r) {
    char buf[512];
    const LossTerms& t = r.terms;
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f,%zu\n", r.iteration,
                  static_cast<double>(r.total), static_cast<double>(t.rgb), static_cast<double>(t.dssim),
                  static_cast<double>(t.depth), static_cast<double>(t.normal), static_cast<double>(t.diffuse),
                  static_cast<double>(t.tissue), static_cast<double>(r.test_psnr), r.splats);
    return buf;
}

std::string log_to_csv(const std::vector<LogRow>& log) {
    std::string out = log_csv_header();
    for (const auto& r : log) out += log_csv_row(r);
    return out;
}

Real scene_radius(const SceneModel& scene) {
    if (scene.splats.empty()) return Real(1);
    const auto [lo, hi] = scene.bounding_box();
    return std::max(Real(1e-6), Real(0.5) * (hi - lo).norm());
}

namespace {

// Mean distance to the k nearest neighbours, via a uniform grid.
std::vector<Real> neighbour_spacing(const std::vector<Vec3>& pts, int k) {
    const std::size_t n = pts.size();
    std::vector<Real> out(n, Real(1));
    if (n < 2) return out;
    Vec3 lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = (hi - lo).cwiseMax(Vec3::Constant(Real(1e-6)));
    // Cells of roughly a few samples each for a surface-like cloud.
    const Real area_guess = 2 * (ext.x() * ext.y() + ext.y() * ext.z() + ext.x() * ext.z());
    const Real cell = std::max(Real(2) * std::sqrt(area_guess / static_cast<Real>(n)), ext.maxCoeff() * Real(1e-4));
    auto key = [&](const Vec3& p) {
        const auto ix = static_cast<std::int64_t>(std::floor((p.x() - lo.x()) / cell));
        const auto iy = static_cast<std::int64_t>(std::floor((p.y() - lo.y()) / cell));
        const auto iz = static_cast<std::int64_t>(std::floor((p.z() - lo.z()) / cell));
        return std::array<std::int64_t, 3>{ix, iy, iz};
    };
    auto hash = [](std::int64_t x, std::int64_t y, std::int64_t z) {
        return static_cast<std::uint64_t>(x) * 73856093ull ^ static_cast<std::uint64_t>(y) * 19349663ull ^
               static_cast<std::uint64_t>(z) * 83492791ull;
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = key(pts[i]);
        grid[hash(c[0], c[1], c[2])].push_back(static_cast<std::uint32_t>(i));
    }
    std::vector<Real> best;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = key(pts[i]);
        best.clear();
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto it = grid.find(hash(c[0] + dx, c[1] + dy, c[2] + dz));
                    if (it == grid.end()) continue;
                    for (std::uint32_t j : it->second)
                        if (j != i) best.push_back((pts[j] - pts[i]).norm());
                }
        if (best.empty()) {
            out[i] = cell;
            continue;
        }
        const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), best.size());
        std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(kk), best.end());
        Real s = 0;
        for (std::size_t t = 0; t < kk; ++t) s += best[t];
        out[i] = s / static_cast<Real>(kk);
    }
    return out;
}

}  // namespace

SceneModel initialize_scene(const PointCloud& points, const LightRig& light, bool use_hash, std::uint64_t seed,
                            Real albedo, Real roughness, Real f0, Real opacity) {
    if (points.positions.empty()) throw std::invalid_argument("initialize_scene: empty point cloud");
    if (points.positions.size() != points.normals.size())
        throw std::invalid_argument("initialize_scene: positions and normals differ in length");
    SceneModel scene;
    const std::vector<Real> spacing = neighbour_spacing(points.positions, 3);
    scene.splats.reserve(points.positions.size());
    for (std::size_t i = 0; i < points.positions.size(); ++i) {
        scene.splats.push_back(make_surface_splat(points.positions[i], points.normals[i], Real(0.7) * spacing[i],
                                                  opacity, Vec3::Constant(albedo), roughness, f0));
    }
    scene.light = light;
    const Real radius = scene_radius(scene);
    if (use_hash) {
        auto [lo, hi] = scene.bounding_box();
        const Vec3 pad = Vec3::Constant(Real(0.05) * radius);
        scene.hash = make_hashgrid(lo - pad, hi + pad, seed ^ 0x9e3779b97f4a7c15ull);
    }
    scene.mlp = make_mlp(scene.hash ? scene.hash->output_dim() : 0, radius, seed);
    scene.validate();
    return scene;
}

ViewLoss evaluate_view_loss(const SceneModel& scene, const Frame& frame, const RenderOutput& out,
                            const ViewCache& cache, const LossWeights& w) {
    ViewLoss vl;
    const int width = out.width, height = out.height;
    const std::size_t n_pix = out.pixel_count();
    if (frame.rgb.data.size() != n_pix * 3) throw std::invalid_argument("view loss: target does not match render");
    vl.upstream.rgb.assign(n_pix * 3, Real(0));

    if (w.rgb > 0) {
        const LossValue l = loss_rgb(out.rgb, frame.rgb.data);
        vl.terms.rgb = l.value;
        for (std::size_t i = 0; i < l.grad.size(); ++i) vl.upstream.rgb[i] += w.rgb * l.grad[i];
    }
    if (w.dssim > 0) {
        const LossValue l = loss_dssim(out.rgb, frame.rgb.data, width, height, 3);
        vl.terms.dssim = l.value;
        for (std::size_t i = 0; i < l.grad.size(); ++i) vl.upstream.rgb[i] += w.dssim * l.grad[i];
    }
    if (w.depth > 0 && frame.depth) {
        const LossValue l = loss_depth(out.depth, frame.depth->data, out.alpha);
        vl.terms.depth = l.value;
        vl.upstream.depth.assign(n_pix, Real(0));
        for (std::size_t i = 0; i < n_pix; ++i) vl.upstream.depth[i] += w.depth * l.grad[i];
    }
    if (w.normal > 0) {
        const NormalLossValue l = loss_normal(out.normal, out.depth, out.alpha, frame.camera);
        vl.terms.normal = l.value;
        if (vl.upstream.depth.empty()) vl.upstream.depth.assign(n_pix, Real(0));
        for (std::size_t i = 0; i < n_pix; ++i) vl.upstream.depth[i] += w.normal * l.grad_depth[i];
        vl.upstream.normal.resize(n_pix * 3);
        for (std::size_t i = 0; i < n_pix * 3; ++i) vl.upstream.normal[i] = w.normal * l.grad_normal[i];
    }

    const std::size_t n = scene.splats.size();
    vl.grad_albedo.assign(n, Vec3::Zero());
    vl.grad_roughness.assign(n, Real(0));
    vl.grad_f0.assign(n, Real(0));
    if (w.diffuse > 0 && !cache.states.empty()) {
        std::vector<Real> mult;
        std::vector<Vec3> alb;
        mult.reserve(cache.states.size());
        alb.reserve(cache.states.size());
        for (const auto& st : cache.states) {
            mult.push_back(st.multiplier);
            alb.push_back(st.inputs.albedo);
        }
        const DiffuseLossValue l = loss_diffuse(mult, alb);
        vl.terms.diffuse = l.value;
        vl.upstream.multiplier.resize(mult.size());
        for (std::size_t k = 0; k < mult.size(); ++k) {
            vl.upstream.multiplier[k] = w.diffuse * l.grad_multiplier[k];
            vl.grad_albedo[cache.states[k].source] += w.diffuse * l.grad_albedo[k];
        }
    }
    if (w.tissue > 0) {
        const TissueLossValue l = loss_tissue(scene.splats);
        vl.terms.tissue = l.value;
        for (std::size_t i = 0; i < n; ++i) {
            vl.grad_albedo[i] += w.tissue * l.grad_albedo[i];
            vl.grad_roughness[i] += w.tissue * l.grad_roughness[i];
            vl.grad_f0[i] += w.tissue * l.grad_f0[i];
        }
    }
    vl.total = total_loss(vl.terms, w);
    return vl;
}

namespace {

void check_terms(const LossTerms& t, int iteration) {
    const std::pair<const char*, Real> named[] = {{"rgb loss", t.rgb},         {"dssim loss", t.dssim},
                                                  {"depth loss", t.depth},     {"normal loss", t.normal},
                                                  {"diffuse loss", t.diffuse}, {"tissue loss", t.tissue}};
    for (const auto& [name, v] : named)
        if (!std::isfinite(v)) throw NumericError(iteration, name);
}

// Adds the direct material gradients, chained through the squashing maps.
void add_material_grads(const SceneModel& scene, const ViewLoss& vl, SceneGradients& g) {
    for (std::size_t i = 0; i < scene.splats.size(); ++i) {
        const Splat& s = scene.splats[i];
        const Vec3 a = s.albedo();
        g.albedo_logit[i] += vl.grad_albedo[i].cwiseProduct(a).cwiseProduct(Vec3::Ones() - a);
        const Real r = s.roughness();
        g.roughness_logit[i] += vl.grad_roughness[i] * r * (1 - r);
        const Real q = sigmoid(s.f0_logit);
        g.f0_logit[i] += vl.grad_f0[i] * kMaxF0 * q * (1 - q);
    }
}

}  // namespace

Real loss_and_gradients(const SceneModel& scene, const Frame& frame, const RenderOptions& options,
                        const LossWeights& weights, SceneGradients& grads, LossTerms* terms) {
    ViewCache cache;
    const RenderOutput out = render_view(scene, frame.camera, options, &cache);
    const ViewLoss vl = evaluate_view_loss(scene, frame, out, cache, weights);
    grads = SceneGradients::zeros_like(scene);
    render_backward(scene, frame.camera, options, cache, vl.upstream, grads);
    add_material_grads(scene, vl, grads);
    if (terms) *terms = vl.terms;
    return vl.total;
}

Real mean_psnr(const SceneModel& scene, const Dataset& dataset, std::span<const std::size_t> frames,
               const RenderOptions& options) {
    if (frames.empty()) return std::numeric_limits<Real>::quiet_NaN();
    double sum = 0;
    for (std::size_t idx : frames) {
        const Frame& f = dataset.frames.at(idx);
        const RenderOutput out = render_view(scene, f.camera, options);
        sum += psnr(out.rgb, f.rgb.data);
    }
    return static_cast<Real>(sum / static_cast<double>(frames.size()));
}

namespace {

// Optimizer state of the per-splat and global parameter groups.
struct Optimizer {
    AdamState position, rotation, scale, opacity, material, light, mlp, hash;
    Vec3 atten_raw = Vec3::Zero();
    bool light_initialized = false;

    static void remap(AdamState& st, std::size_t width, const DensifyResult& d) {
        if (st.m.empty()) return;
        std::vector<Real> m(d.origin.size() * width, Real(0)), v(d.origin.size() * width, Real(0));
        for (std::size_t j = 0; j < d.origin.size(); ++j) {
            if (d.fresh[j]) continue;
            for (std::size_t k = 0; k < width; ++k) {
                m[j * width + k] = st.m[d.origin[j] * width + k];
                v[j * width + k] = st.v[d.origin[j] * width + k];
            }
        }
        st.m = std::move(m);
        st.v = std::move(v);
    }

    void remap_splats(const DensifyResult& d) {
        remap(position, 3, d);
        remap(rotation, 4, d);
        remap(scale, 3, d);
        remap(opacity, 1, d);
        remap(material, 5, d);
    }
};

void step_splats(SceneModel& scene, const SceneGradients& g, Optimizer& opt, const LearningRates& lr, Real radius) {
    const std::size_t n = scene.splats.size();
    auto& sp = scene.splats;
    std::vector<Real> p, q;
    auto run = [&](Real rate, AdamState& st, std::size_t width, auto&& get, auto&& grad) {
        if (!(rate > 0)) return;
        p.resize(n * width);
        q.resize(n * width);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < width; ++k) {
                p[i * width + k] = get(sp[i], k);
                q[i * width + k] = grad(i, k);
            }
        adam_update(p, q, st, AdamConfig{rate});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < width; ++k) get(sp[i], k) = p[i * width + k];
    };
    const auto ik = [](std::size_t k) { return static_cast<Eigen::Index>(k); };
    run(lr.position * radius, opt.position, 3, [&](Splat& s, std::size_t k) -> Real& { return s.position[ik(k)]; },
        [&](std::size_t i, std::size_t k) { return g.position[i][ik(k)]; });
    run(lr.rotation, opt.rotation, 4, [&](Splat& s, std::size_t k) -> Real& { return s.rotation[ik(k)]; },
        [&](std::size_t i, std::size_t k) { return g.rotation[i][ik(k)]; });
    run(lr.scale, opt.scale, 3, [&](Splat& s, std::size_t k) -> Real& { return s.log_scale[ik(k)]; },
        [&](std::size_t i, std::size_t k) { return g.log_scale[i][ik(k)]; });
    run(lr.opacity, opt.opacity, 1, [&](Splat& s, std::size_t) -> Real& { return s.opacity_logit; },
        [&](std::size_t i, std::size_t) { return g.opacity_logit[i]; });
    run(lr.material, opt.material, 5,
        [&](Splat& s, std::size_t k) -> Real& {
            if (k < 3) return s.albedo_logit[ik(k)];
            return k == 3 ? s.roughness_logit : s.f0_logit;
        },
        [&](std::size_t i, std::size_t k) {
            if (k < 3) return g.albedo_logit[i][ik(k)];
            return k == 3 ? g.roughness_logit[i] : g.f0_logit[i];
        });
    if (lr.position > 0 || lr.rotation > 0 || lr.scale > 0)
        for (auto& s : sp) enforce_splat_invariants(s);
}

void step_light(LightRig& light, const SceneGradients& g, Optimizer& opt, Real rate) {
    if (!(rate > 0)) return;
    if (!opt.light_initialized) {
        // Attenuation coefficients are optimized through a softplus to stay positive.
        for (int k = 0; k < 3; ++k)
            opt.atten_raw[k] = softplus_inverse(std::max(light.atten_coeffs[k], Real(1e-6)));
        opt.light_initialized = true;
    }
    std::vector<Real> p(11), q(11);
    for (int k = 0; k < 3; ++k) {
        p[k] = light.offset[k];
        q[k] = g.light_offset[k];
        p[3 + k] = light.intensity[k];
        q[3 + k] = g.light_intensity[k];
        p[6 + k] = opt.atten_raw[k];
        q[6 + k] = g.light_atten[k] * sigmoid(opt.atten_raw[k]);
    }
    p[9] = light.spot_inner;
    q[9] = g.spot_inner;
    p[10] = light.spot_outer;
    q[10] = g.spot_outer;
    adam_update(p, q, opt.light, AdamConfig{rate});
    for (int k = 0; k < 3; ++k) {
        light.offset[k] = p[k];
        light.intensity[k] = std::max(Real(0), p[3 + k]);
        opt.atten_raw[k] = p[6 + k];
        light.atten_coeffs[k] = softplus(opt.atten_raw[k]);
    }
    light.spot_outer = std::clamp(p[10], Real(1e-3), Real(kPi));
    light.spot_inner = std::clamp(p[9], Real(1e-4), light.spot_outer);
}

void step_network(SceneModel& scene, const SceneGradients& g, Optimizer& opt, const LearningRates& lr) {
    if (lr.mlp > 0) {
        std::vector<Real> p, q;
        for (std::size_t l = 0; l < scene.mlp.weights.size(); ++l) {
            const MatX& w = scene.mlp.weights[l];
            p.insert(p.end(), w.data(), w.data() + w.size());
            q.insert(q.end(), g.mlp.weights[l].data(), g.mlp.weights[l].data() + w.size());
            const VecX& b = scene.mlp.biases[l];
            p.insert(p.end(), b.data(), b.data() + b.size());
            q.insert(q.end(), g.mlp.biases[l].data(), g.mlp.biases[l].data() + b.size());
        }
        adam_update(p, q, opt.mlp, AdamConfig{lr.mlp});
        std::size_t at = 0;
        for (std::size_t l = 0; l < scene.mlp.weights.size(); ++l) {
            MatX& w = scene.mlp.weights[l];
            std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(at), w.size(), w.data());
            at += static_cast<std::size_t>(w.size());
            VecX& b = scene.mlp.biases[l];
            std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(at), b.size(), b.data());
            at += static_cast<std::size_t>(b.size());
        }
    }
    if (lr.hash > 0 && scene.hash) adam_update(scene.hash->table, g.hash_table, opt.hash, AdamConfig{lr.hash});
}

}  // namespace

TrainResult train(SceneModel scene, const Dataset& dataset, const TrainConfig& config, const ProgressFn& progress) {
    config.validate();
    dataset.validate();
    scene.validate();
    const std::vector<std::size_t> train_idx = dataset.train_indices();
    const std::vector<std::size_t> test_idx = dataset.test_indices();
    if (train_idx.empty()) throw DatasetError("dataset has no training frames");

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train_idx.size() - 1);
    const Real radius = scene_radius(scene);
    Optimizer opt;
    RenderOptions ropt;
    ropt.raster.threads = config.threads;
    ropt.noise_sigma = config.noise_sigma;
    RenderOptions eval_opt;
    eval_opt.raster.threads = config.threads;

    std::vector<Real> grad_accum(scene.splats.size(), Real(0));
    std::vector<std::uint32_t> visible_count(scene.splats.size(), 0);

    TrainResult result;
    for (int it = 1; it <= config.iterations; ++it) {
        const Frame& frame = dataset.frames[train_idx[pick(rng)]];
        ropt.noise_seed = rng();

        ViewCache cache;
        RenderOutput out;
        try {
            out = render_view(scene, frame.camera, ropt, &cache);
        } catch (const std::domain_error& e) {
            throw NumericError(it, std::string("render (") + e.what() + ")");
        }
        const ViewLoss vl = evaluate_view_loss(scene, frame, out, cache, config.weights);
        check_terms(vl.terms, it);
        if (!std::isfinite(vl.total)) throw NumericError(it, "total loss");

        SceneGradients g = SceneGradients::zeros_like(scene);
        render_backward(scene, frame.camera, ropt, cache, vl.upstream, g);
        add_material_grads(scene, vl, g);
        if (!g.all_finite()) throw NumericError(it, "gradient");

        step_splats(scene, g, opt, config.lr, radius);
        step_light(scene.light, g, opt, config.lr.light);
        step_network(scene, g, opt, config.lr);

        if (config.densify.enabled) {
            for (const auto& st : cache.states) {
                grad_accum[st.source] += g.mean2d_norm[st.source];
                ++visible_count[st.source];
            }
            const DensifyConfig& dc = config.densify;
            if (it >= dc.start && it <= dc.stop && (it - dc.start) % dc.interval == 0) {
                std::vector<Real> mean(scene.splats.size(), Real(0));
                for (std::size_t i = 0; i < mean.size(); ++i)
                    if (visible_count[i] > 0) mean[i] = grad_accum[i] / static_cast<Real>(visible_count[i]);
                DensifyResult d = densify_prune(scene, mean, dc, config.seed + static_cast<std::uint64_t>(it));
                opt.remap_splats(d);
                scene = std::move(d.scene);
                grad_accum.assign(scene.splats.size(), Real(0));
                visible_count.assign(scene.splats.size(), 0);
            }
        }

        if (it % config.log_every == 0 || it == config.iterations) {
            LogRow row;
            row.iteration = it;
            row.total = vl.total;
            row.terms = vl.terms;
            row.test_psnr = mean_psnr(scene, dataset, test_idx, eval_opt);
            row.splats = scene.splats.size();
            result.log.push_back(row);
            if (progress) progress(row);
        }
        if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0 && !config.checkpoint_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06d.splat", it);
            save_scene(scene, config.checkpoint_dir / name);
        }
    }
    result.scene = std::move(scene);
    return result;
}

DensifyResult densify_prune(const SceneModel& scene, std::span<const Real> mean_grad, const DensifyConfig& config,
                            std::uint64_t seed) {
    if (mean_grad.size() != scene.splats.size()) throw std::invalid_argument("densify_prune: gradient size mismatch");
    std::size_t keep = 0;
    for (const auto& s : scene.splats)
        if (!(s.opacity() < config.prune_opacity)) ++keep;
    if (keep == 0) throw std::runtime_error("densify_prune: would empty scene");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0, 1);
    const Real radius = scene_radius(scene);
    DensifyResult d;
    d.scene.light = scene.light;
    d.scene.mlp = scene.mlp;
    d.scene.hash = scene.hash;
    d.scene.format_version = scene.format_version;
    std::size_t budget = config.max_splats > keep ? config.max_splats - keep : 0;
    auto push = [&](const Splat& s, std::size_t origin, bool fresh) {
        d.scene.splats.push_back(s);
        d.origin.push_back(origin);
        d.fresh.push_back(fresh);
    };
    for (std::size_t i = 0; i < scene.splats.size(); ++i) {
        const Splat& s = scene.splats[i];
        if (s.opacity() < config.prune_opacity) {
            ++d.pruned;
            continue;
        }
        if (!(mean_grad[i] > config.grad_threshold) || budget == 0) {
            push(s, i, false);
            continue;
        }
        const Vec3 scale = s.scale();
        const Mat3 R = quat_to_matrix(s.rotation);
        // Sample offsets inside the splat's footprint (the flat axis has ~zero extent).
        auto sample = [&] {
            Vec3 local(static_cast<Real>(normal(rng)), static_cast<Real>(normal(rng)), static_cast<Real>(normal(rng)));
            return Vec3(R * local.cwiseProduct(scale));
        };
        if (scale.maxCoeff() > config.split_scale * radius) {
            for (int c = 0; c < 2; ++c) {
                Splat child = s;
                child.position = s.position + sample();
                for (int k = 0; k < 3; ++k)
                    if (k != s.flat_axis()) child.log_scale[k] -= static_cast<Real>(std::log(1.6));
                enforce_splat_invariants(child);
                push(child, i, true);
            }
            ++d.split;
            --budget;
        } else {
            push(s, i, false);
            Splat child = s;
            child.position = s.position + Real(0.5) * sample();
            push(child, i, true);
            ++d.cloned;
            --budget;
        }
    }
    return d;
}

}  // namespace lumen::inline LUMEN_ABI
