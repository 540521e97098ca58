// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lumen/dataset.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

using Vec3d = Eigen::Vector3d;

struct TrajectorySpec {
    int frames = 60;
    /// Camera positions run along the centerline parameter range.
    double t_begin = 0.05;
    double t_end = 0.5;
    /// Every n-th frame goes to the held-out split (0: none).
    int test_every = 6;
    Real fov_deg = 100;
    int width = 128;
    int height = 128;
    /// Uniform roll / pitch jitter (degrees) for training and held-out frames.
    Real train_roll_deg = 8;
    Real train_pitch_deg = 3;
    Real test_roll_deg = 25;
    Real test_pitch_deg = 6;
};

/// Closed procedural tube: a Catmull-Rom centerline with a radius profile,
/// optional sinusoidal bumps and flat end caps. World units are millimetres.
/// Geometry is evaluated in double precision.
struct TubeSpec {
    std::vector<Vec3d> centerline = {Vec3d(0, 0, 0), Vec3d(0, 0, 120)};
    /// Radii at evenly spaced centerline parameters, linearly interpolated.
    std::vector<double> radii = {10};
    /// Relative radial perturbation r (1 + a sin(2 pi fa t) cos(k theta)).
    double bump_amplitude = 0;
    double bump_axial_freq = 0;
    int bump_lobes = 0;

    Vec3 albedo = Vec3(Real(0.78), Real(0.45), Real(0.38));
    /// Alternating bands of a second albedo along the tube when set.
    std::optional<Vec3> band_albedo;
    int bands = 0;
    Real roughness = Real(0.45);
    Real f0 = Real(0.02);

    LightRig light = default_light();
    TrajectorySpec trajectory;

    static LightRig default_light();
    void validate() const;
};

/// Evaluated tube geometry shared by the sampler and the ray tracer.
class Tube {
public:
    explicit Tube(const TubeSpec& spec);

    const TubeSpec& spec() const { return spec_; }
    Vec3d center(double t) const;
    Vec3d tangent(double t) const;
    /// Orthonormal frame (normal, binormal) around the centerline.
    std::pair<Vec3d, Vec3d> frame(double t) const;
    double radius(double t, double theta) const;
    double mean_radius() const;
    Vec3d wall_point(double t, double theta) const;
    /// Inward-facing unit normal of the wall.
    Vec3d wall_normal(double t, double theta) const;

    struct Closest {
        double t = 0;
        double theta = 0;
        double distance = 0;  // from the centerline
        int sample = 0;       // polyline hint for warm starts
    };
    Closest closest(const Vec3d& p, int hint = -1) const;

    /// Wall term of the implicit function: radius(t, theta) - distance at the
    /// closest centerline point.
    double wall_function(const Vec3d& p, int* hint = nullptr) const;
    /// Positive inside, zero on the surface (wall and caps). `hint`
    /// warm-starts the centerline search and is updated.
    double sdf(const Vec3d& p, int* hint = nullptr, Closest* where = nullptr) const;
    Vec3 albedo(double t) const;

private:
    TubeSpec spec_;
    std::vector<Vec3d> samples_;
    std::vector<Vec3d> normals_;
    Vec3d spline(double t, int derivative) const;
};

struct SurfaceSamples {
    std::vector<Vec3d> positions;
    std::vector<Vec3d> normals;
    PointCloud cloud;  // the same samples at render precision
    std::vector<Vec3> albedo;
    /// 0 for the wall, 1 and 2 for the end caps.
    std::vector<int> part;
};

SurfaceSamples sample_tube_surface(const Tube& tube, std::size_t count, std::mt19937_64& rng);

struct TubeCameras {
    std::vector<Camera> cameras;
    std::vector<bool> test;
};

TubeCameras tube_trajectory(const Tube& tube, std::mt19937_64& rng);

struct RaytraceOptions {
    int max_steps = 512;
    double tolerance = 1e-5;
    /// Smallest march step, in units of the tube's mean radius.
    double min_step = 0.01;
    int threads = 0;
};

struct RaytraceResult {
    int width = 0, height = 0;
    std::vector<Real> rgb;
    std::vector<Real> depth;
    std::vector<Real> normal;
    std::vector<std::uint8_t> hit;
    std::size_t misses = 0;
};

/// Per-pixel sphere tracing of the tube with the classic shading model
/// (diffuse multiplier fixed at 1).
RaytraceResult reference_raytrace(const Tube& tube, const Camera& camera, const LightRig& light,
                                  const RaytraceOptions& options = {});

/// Surface samples, trajectory and ray-traced frames in one dataset.
Dataset make_tube_dataset(const TubeSpec& spec, std::size_t points, std::uint64_t seed,
                          const RaytraceOptions& options = {});

}  // namespace lumen::inline LUMEN_ABI
