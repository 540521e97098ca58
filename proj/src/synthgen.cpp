// SPDX-License-Identifier: Apache-2.0
#include "lumen/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lumen/raster.hpp"
#include "lumen/shading.hpp"

namespace lumen::inline LUMEN_ABI {

namespace {

constexpr int kFrameSamples = 1024;
constexpr double kTwoPi = 6.283185307179586476925;

double deg2rad(double d) { return d * 3.14159265358979323846 / 180.0; }

Eigen::Matrix3d rot_x(double a) {
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}

Eigen::Matrix3d rot_z(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return m;
}

double uniform(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Vec3d any_perpendicular(const Vec3d& t) {
    int k = 0;
    t.cwiseAbs().minCoeff(&k);
    const Vec3d axis = Vec3d::Unit(k);
    return (axis - axis.dot(t) * t).normalized();
}

}  // namespace

LightRig TubeSpec::default_light() {
    LightRig l;
    l.offset = Vec3(Real(1.5), 0, 0);
    l.intensity = Vec3(Real(8), Real(8), Real(8));
    l.atten_coeffs = Vec3(1, 0, Real(0.01));
    l.spot_inner = Real(0.6);
    l.spot_outer = Real(1.2);
    return l;
}

void TubeSpec::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("tube: " + m); };
    if (centerline.size() < 2) fail("centerline needs at least 2 control points");
    for (std::size_t i = 1; i < centerline.size(); ++i)
        if ((centerline[i] - centerline[i - 1]).norm() <= 0) fail("repeated centerline control point");
    if (radii.empty()) fail("radius profile is empty");
    for (double r : radii)
        if (!(r > 0) || !std::isfinite(r)) fail("radius must be positive");
    if (!(std::abs(bump_amplitude) < 1)) fail("bump amplitude must be in (-1, 1)");
    if (bump_lobes < 0) fail("bump lobes must be >= 0");
    auto unit = [](const Vec3& v) { return (v.array() >= 0).all() && (v.array() <= 1).all(); };
    if (!unit(albedo)) fail("albedo must be in [0, 1]");
    if (band_albedo && !unit(*band_albedo)) fail("band albedo must be in [0, 1]");
    if (bands < 0) fail("bands must be >= 0");
    if (!(roughness > 0 && roughness <= 1)) fail("roughness must be in (0, 1]");
    if (!(f0 >= 0 && f0 <= kMaxF0)) fail("f0 must be in [0, 0.03]");
    light.validate();
    const auto& tr = trajectory;
    if (tr.frames < 1) fail("trajectory needs at least one frame");
    if (!(tr.t_begin > 0 && tr.t_end < 1 && tr.t_begin <= tr.t_end)) fail("trajectory must lie in (0, 1)");
    if (tr.width < 1 || tr.height < 1) fail("image size must be positive");
    if (!(tr.fov_deg > 0 && tr.fov_deg < 170)) fail("fov must be in (0, 170) degrees");
    if (tr.test_every < 0) fail("test_every must be >= 0");
}

Tube::Tube(const TubeSpec& spec) : spec_(spec) {
    spec_.validate();
    samples_.resize(kFrameSamples);
    normals_.resize(kFrameSamples);
    std::vector<Vec3d> tangents(kFrameSamples);
    for (int k = 0; k < kFrameSamples; ++k) {
        const double t = double(k) / (kFrameSamples - 1);
        samples_[k] = spline(t, 0);
        tangents[k] = spline(t, 1).normalized();
    }
    // Rotation-minimizing frames by double reflection.
    normals_[0] = any_perpendicular(tangents[0]);
    for (int k = 0; k + 1 < kFrameSamples; ++k) {
        const Vec3d v1 = samples_[k + 1] - samples_[k];
        const double c1 = v1.squaredNorm();
        Vec3d r = normals_[k], tl = tangents[k];
        if (c1 > 0) {
            r -= (2 / c1) * v1.dot(r) * v1;
            tl -= (2 / c1) * v1.dot(tl) * v1;
        }
        const Vec3d v2 = tangents[k + 1] - tl;
        const double c2 = v2.squaredNorm();
        if (c2 > 0) r -= (2 / c2) * v2.dot(r) * v2;
        normals_[k + 1] = (r - r.dot(tangents[k + 1]) * tangents[k + 1]).normalized();
    }
}

Vec3d Tube::spline(double t, int derivative) const {
    const auto& P = spec_.centerline;
    const int n = static_cast<int>(P.size());
    const int segs = n - 1;
    const double u = t * segs;
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, segs - 1);
    const double s = u - i;
    auto point = [&](int k) -> Vec3d {
        if (k < 0) return 2 * P[0] - P[1];
        if (k >= n) return 2 * P[n - 1] - P[n - 2];
        return P[k];
    };
    const Vec3d p0 = point(i - 1), p1 = point(i), p2 = point(i + 1), p3 = point(i + 2);
    const Vec3d a = 2 * p1, b = p2 - p0, c = 2 * p0 - 5 * p1 + 4 * p2 - p3, d = -p0 + 3 * p1 - 3 * p2 + p3;
    switch (derivative) {
        case 0: return 0.5 * (a + s * (b + s * (c + s * d)));
        case 1: return 0.5 * segs * (b + s * (2 * c + 3 * s * d));
        default: return 0.5 * segs * segs * (2 * c + 6 * s * d);
    }
}

Vec3d Tube::center(double t) const { return spline(t, 0); }
Vec3d Tube::tangent(double t) const { return spline(t, 1).normalized(); }

std::pair<Vec3d, Vec3d> Tube::frame(double t) const {
    const double u = std::clamp(t, 0.0, 1.0) * (kFrameSamples - 1);
    const int k = std::min(static_cast<int>(u), kFrameSamples - 2);
    const double s = u - k;
    const Vec3d T = tangent(t);
    Vec3d n = (1 - s) * normals_[k] + s * normals_[k + 1];
    n = (n - n.dot(T) * T).normalized();
    return {n, T.cross(n)};
}

double Tube::radius(double t, double theta) const {
    const auto& R = spec_.radii;
    double base = R.front();
    if (R.size() > 1) {
        const double u = std::clamp(t, 0.0, 1.0) * double(R.size() - 1);
        const std::size_t k = std::min(static_cast<std::size_t>(u), R.size() - 2);
        const double s = u - double(k);
        base = (1 - s) * R[k] + s * R[k + 1];
    }
    if (spec_.bump_amplitude == 0) return base;
    return base * (1 + spec_.bump_amplitude * std::sin(kTwoPi * spec_.bump_axial_freq * t) *
                           std::cos(spec_.bump_lobes * theta));
}

double Tube::mean_radius() const {
    double s = 0;
    for (double r : spec_.radii) s += r;
    return s / double(spec_.radii.size());
}

Vec3d Tube::wall_point(double t, double theta) const {
    const auto [n, b] = frame(t);
    return center(t) + radius(t, theta) * (std::cos(theta) * n + std::sin(theta) * b);
}

Vec3d Tube::wall_normal(double t, double theta) const {
    constexpr double h = 1e-6;
    const Vec3d dt = wall_point(t + h, theta) - wall_point(t - h, theta);
    const Vec3d dth = wall_point(t, theta + h) - wall_point(t, theta - h);
    Vec3d n = dt.cross(dth).normalized();
    if (n.dot(center(t) - wall_point(t, theta)) < 0) n = -n;
    return n;
}

Tube::Closest Tube::closest(const Vec3d& p, int hint) const {
    auto d2 = [&](int k) { return (samples_[k] - p).squaredNorm(); };
    int best = 0;
    if (hint < 0 || hint >= kFrameSamples) {
        double bd = d2(0);
        for (int k = 1; k < kFrameSamples; ++k) {
            const double d = d2(k);
            if (d < bd) bd = d, best = k;
        }
    } else {
        best = hint;
        double bd = d2(best);
        for (int dir : {-1, 1}) {
            while (true) {
                const int k = best + dir;
                if (k < 0 || k >= kFrameSamples) break;
                const double d = d2(k);
                if (!(d < bd)) break;
                bd = d, best = k;
            }
        }
    }
    double t = double(best) / (kFrameSamples - 1);
    for (int it = 0; it < 8; ++it) {
        const Vec3d c = spline(t, 0) - p, c1 = spline(t, 1), c2 = spline(t, 2);
        const double g = c.dot(c1);
        const double gp = c1.squaredNorm() + c.dot(c2);
        if (!(gp > 0)) break;
        const double next = std::clamp(t - g / gp, 0.0, 1.0);
        const double step = std::abs(next - t);
        t = next;
        if (step < 1e-15) break;
    }
    Closest out;
    out.t = t;
    const Vec3d v = p - center(t);
    out.distance = v.norm();
    const auto [n, b] = frame(t);
    out.theta = std::atan2(v.dot(b), v.dot(n));
    out.sample = std::clamp(static_cast<int>(std::lround(t * (kFrameSamples - 1))), 0, kFrameSamples - 1);
    return out;
}

double Tube::wall_function(const Vec3d& p, int* hint) const {
    const Closest c = closest(p, hint ? *hint : -1);
    if (hint) *hint = c.sample;
    return radius(c.t, c.theta) - c.distance;
}

double Tube::sdf(const Vec3d& p, int* hint, Closest* where) const {
    const Closest c = closest(p, hint ? *hint : -1);
    if (hint) *hint = c.sample;
    if (where) *where = c;
    const double wall = radius(c.t, c.theta) - c.distance;
    const double cap0 = (p - center(0)).dot(tangent(0));
    const double cap1 = (center(1) - p).dot(tangent(1));
    return std::min({wall, cap0, cap1});
}

Vec3 Tube::albedo(double t) const {
    if (spec_.band_albedo && spec_.bands > 0) {
        const int band = std::min(static_cast<int>(std::clamp(t, 0.0, 1.0) * spec_.bands), spec_.bands - 1);
        if (band % 2 == 1) return *spec_.band_albedo;
    }
    return spec_.albedo;
}

SurfaceSamples sample_tube_surface(const Tube& tube, std::size_t count, std::mt19937_64& rng) {
    constexpr int nt = 256, nth = 96;
    const double dt = 1.0 / nt, dth = kTwoPi / nth;
    std::vector<double> cdf;
    cdf.reserve(nt * nth + 2);
    double total = 0;
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nth; ++j) {
            const double t = (i + 0.5) * dt, th = (j + 0.5) * dth;
            const Vec3d pt = (tube.wall_point(t + 1e-6, th) - tube.wall_point(t - 1e-6, th)) / 2e-6;
            const Vec3d pth = (tube.wall_point(t, th + 1e-6) - tube.wall_point(t, th - 1e-6)) / 2e-6;
            total += pt.cross(pth).norm() * dt * dth;
            cdf.push_back(total);
        }
    double rmax[2] = {0, 0};
    for (int cap = 0; cap < 2; ++cap) {
        double area = 0;
        for (int j = 0; j < nth; ++j) {
            const double r = tube.radius(cap, (j + 0.5) * dth);
            area += 0.5 * r * r * dth;
            rmax[cap] = std::max(rmax[cap], r);
        }
        total += area;
        cdf.push_back(total);
    }

    SurfaceSamples out;
    out.positions.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double u = uniform(rng) * total;
        const auto cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const std::size_t idx = std::min(cell, cdf.size() - 1);
        Vec3d p, n;
        double t_at;
        int part = 0;
        if (idx < std::size_t(nt * nth)) {
            const double t = (double(idx / nth) + uniform(rng)) * dt;
            const double th = (double(idx % nth) + uniform(rng)) * dth;
            p = tube.wall_point(t, th);
            n = tube.wall_normal(t, th);
            t_at = t;
        } else {
            const int cap = static_cast<int>(idx - std::size_t(nt * nth));
            part = cap + 1;
            t_at = cap;
            double th, r;
            do {  // angular density proportional to r(theta)^2
                th = uniform(rng) * kTwoPi;
                r = tube.radius(t_at, th);
            } while (uniform(rng) * rmax[cap] * rmax[cap] > r * r);
            const double rho = r * std::sqrt(uniform(rng));
            const auto [fn, fb] = tube.frame(t_at);
            p = tube.center(t_at) + rho * (std::cos(th) * fn + std::sin(th) * fb);
            n = cap == 0 ? tube.tangent(0) : Vec3d(-tube.tangent(1));
        }
        out.positions.push_back(p);
        out.normals.push_back(n);
        out.cloud.positions.push_back(p.cast<Real>());
        out.cloud.normals.push_back(n.cast<Real>());
        out.albedo.push_back(tube.albedo(t_at));
        out.part.push_back(part);
    }
    return out;
}

TubeCameras tube_trajectory(const Tube& tube, std::mt19937_64& rng) {
    const auto& tr = tube.spec().trajectory;
    const double f = 0.5 * tr.width / std::tan(deg2rad(tr.fov_deg) / 2);
    TubeCameras out;
    for (int i = 0; i < tr.frames; ++i) {
        const double t = tr.frames == 1 ? tr.t_begin : tr.t_begin + (tr.t_end - tr.t_begin) * i / (tr.frames - 1);
        const bool test = tr.test_every > 0 && i % tr.test_every == tr.test_every - 1;
        const Vec3d eye = tube.center(t);
        const Vec3d fwd = tube.tangent(t);
        const Vec3d down = tube.frame(t).first;
        const Vec3d right = down.cross(fwd);
        Eigen::Matrix3d R;
        R.row(0) = right.transpose();
        R.row(1) = down.transpose();
        R.row(2) = fwd.transpose();
        const double roll_amp = deg2rad(test ? tr.test_roll_deg : tr.train_roll_deg);
        const double pitch_amp = deg2rad(test ? tr.test_pitch_deg : tr.train_pitch_deg);
        const double roll = (2 * uniform(rng) - 1) * roll_amp;
        const double pitch = (2 * uniform(rng) - 1) * pitch_amp;
        R = rot_z(roll) * rot_x(pitch) * R;
        Camera cam;
        cam.fx = cam.fy = Real(f);
        cam.cx = Real(0.5 * tr.width);
        cam.cy = Real(0.5 * tr.height);
        cam.width = tr.width;
        cam.height = tr.height;
        cam.rotation = R.cast<Real>();
        cam.translation = (-R * eye).cast<Real>();
        out.cameras.push_back(cam);
        out.test.push_back(test);
    }
    return out;
}

RaytraceResult reference_raytrace(const Tube& tube, const Camera& camera, const LightRig& light,
                                  const RaytraceOptions& options) {
    camera.validate();
    RaytraceResult res;
    res.width = camera.width;
    res.height = camera.height;
    const std::size_t n = std::size_t(camera.width) * std::size_t(camera.height);
    res.rgb.assign(3 * n, 0);
    res.depth.assign(n, 0);
    res.normal.assign(3 * n, 0);
    res.hit.assign(n, 0);

    const Eigen::Matrix3d R = camera.rotation.cast<double>();
    const Vec3d tr = camera.translation.cast<double>();
    const Vec3d origin = -R.transpose() * tr;
    const double min_step = options.min_step * tube.mean_radius();
    const auto& spec = tube.spec();
    const double fx = camera.fx, fy = camera.fy, cx = camera.cx, cy = camera.cy;

    parallel_for(std::size_t(camera.height), options.threads, [&](std::size_t y) {
        int hint = -1;
        for (int x = 0; x < camera.width; ++x) {
            const std::size_t pix = y * std::size_t(camera.width) + std::size_t(x);
            const Vec3d dir_cam = Vec3d((x + 0.5 - cx) / fx, (double(y) + 0.5 - cy) / fy, 1).normalized();
            const Vec3d dir = R.transpose() * dir_cam;
            double s = 0, s_prev = 0;
            double f = tube.sdf(origin, &hint);
            if (!(f > 0)) continue;
            bool hit = false;
            for (int step = 0; step < options.max_steps; ++step) {
                s_prev = s;
                s += std::max(0.9 * f, min_step);
                f = tube.sdf(origin + s * dir, &hint);
                if (std::abs(f) < options.tolerance) {
                    hit = true;
                    break;
                }
                if (f < 0) {
                    double lo = s_prev, hi = s;
                    for (int it = 0; it < 100; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        const double fm = tube.sdf(origin + mid * dir, &hint);
                        if (std::abs(fm) < options.tolerance || hi - lo < 1e-13) {
                            s = mid;
                            break;
                        }
                        if (fm > 0) lo = mid;
                        else hi = mid;
                        s = mid;
                    }
                    hit = true;
                    break;
                }
            }
            if (!hit) continue;

            const Vec3d p = origin + s * dir;
            Tube::Closest where;
            tube.sdf(p, &hint, &where);
            Vec3d grad;
            const double h = 1e-6 * tube.mean_radius();
            for (int a = 0; a < 3; ++a) {
                Vec3d e = Vec3d::Zero();
                e[a] = h;
                grad[a] = tube.sdf(p + e, &hint) - tube.sdf(p - e, &hint);
            }
            Vec3d nrm = grad.normalized();
            if (nrm.dot(-dir) < 0) nrm = -nrm;

            const Vec3d p_cam = R * p + tr;
            const Vec3d n_cam = R * nrm;
            const Vec3d to_light = light.offset.cast<double>() - p_cam;
            const double dist = to_light.norm();

            ShadingInputs in;
            in.light_dir = (to_light / dist).cast<Real>();
            in.view_dir = (-p_cam).normalized().cast<Real>();
            in.normal = n_cam.cast<Real>();
            in.distance = Real(dist);
            in.albedo = tube.albedo(where.t);
            in.roughness = spec.roughness;
            in.f0 = spec.f0;
            in.forward = Vec3::UnitZ();
            const Vec3 rgb = shade(in, classic_diffuse(in.albedo), light).rgb;
            for (int c = 0; c < 3; ++c) {
                res.rgb[3 * pix + c] = rgb[c];
                res.normal[3 * pix + c] = in.normal[c];
            }
            res.depth[pix] = Real(p_cam.z());
            res.hit[pix] = 1;
        }
    });
    for (auto h : res.hit) res.misses += h ? 0 : 1;
    return res;
}

Dataset make_tube_dataset(const TubeSpec& spec, std::size_t points, std::uint64_t seed,
                          const RaytraceOptions& options) {
    const Tube tube(spec);
    std::mt19937_64 rng(seed);
    SurfaceSamples samples = sample_tube_surface(tube, points, rng);
    const TubeCameras cams = tube_trajectory(tube, rng);
    Dataset ds;
    ds.points = std::move(samples.cloud);
    ds.light = spec.light;
    for (std::size_t i = 0; i < cams.cameras.size(); ++i) {
        const Camera& cam = cams.cameras[i];
        const RaytraceResult rt = reference_raytrace(tube, cam, spec.light, options);
        Frame f;
        char name[16];
        std::snprintf(name, sizeof(name), "%04zu", i);
        f.name = name;
        f.camera = cam;
        f.test = cams.test[i];
        f.rgb = Image(cam.width, cam.height, 3);
        std::copy(rt.rgb.begin(), rt.rgb.end(), f.rgb.data.begin());
        Image depth(cam.width, cam.height, 1);
        std::copy(rt.depth.begin(), rt.depth.end(), depth.data.begin());
        f.depth = std::move(depth);
        ds.frames.push_back(std::move(f));
    }
    return ds;
}

}  // namespace lumen::inline LUMEN_ABI
