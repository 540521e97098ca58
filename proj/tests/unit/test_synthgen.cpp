// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "lumen/dataset.hpp"
#include "lumen/synthgen.hpp"

using namespace lumen;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lumen_synth_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TubeSpec small_spec() {
    TubeSpec spec;
    spec.trajectory.frames = 6;
    spec.trajectory.test_every = 3;
    spec.trajectory.width = 24;
    spec.trajectory.height = 20;
    return spec;
}

}  // namespace

TEST_CASE("straight tube geometry") {
    const Tube tube{TubeSpec{}};
    CHECK((tube.center(0) - Vec3d(0, 0, 0)).norm() < 1e-12);
    CHECK((tube.center(1) - Vec3d(0, 0, 120)).norm() < 1e-12);
    CHECK((tube.tangent(0.3) - Vec3d(0, 0, 1)).norm() < 1e-9);
    CHECK(tube.mean_radius() == doctest::Approx(10));
    CHECK(tube.sdf(Vec3d(0, 0, 60)) == doctest::Approx(10));
    CHECK(tube.sdf(Vec3d(3, 4, 60)) == doctest::Approx(5));
    CHECK(tube.sdf(Vec3d(0, 0, 2)) == doctest::Approx(2));
    CHECK(tube.sdf(Vec3d(20, 0, 60)) < 0);
    const auto c = tube.closest(Vec3d(6, 0, 30));
    CHECK(c.t == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(c.distance == doctest::Approx(6));
}

TEST_CASE("curved tube frames are orthonormal and wall points lie on the surface") {
    TubeSpec spec;
    spec.centerline = {Vec3d(0, 0, 0), Vec3d(10, 5, 40), Vec3d(-5, 15, 80), Vec3d(0, 10, 120)};
    spec.radii = {9, 12, 8};
    spec.bump_amplitude = 0.05;
    spec.bump_axial_freq = 3;
    spec.bump_lobes = 4;
    const Tube tube(spec);
    for (double t = 0.05; t < 0.96; t += 0.07) {
        const auto [n, b] = tube.frame(t);
        const Vec3d tan = tube.tangent(t);
        CHECK(std::abs(n.dot(tan)) < 1e-6);
        CHECK(std::abs(b.dot(tan)) < 1e-6);
        CHECK(std::abs(n.dot(b)) < 1e-9);
        CHECK(n.norm() == doctest::Approx(1));
        for (double th = 0; th < 6.2; th += 0.9) {
            const Vec3d p = tube.wall_point(t, th);
            CHECK(std::abs(tube.sdf(p)) < 1e-6);
            // The inward normal points toward the interior.
            CHECK(tube.sdf(p + 0.05 * tube.wall_normal(t, th)) > 0);
        }
    }
}

TEST_CASE("surface samples lie on the surface with area-proportional caps") {
    const Tube tube{TubeSpec{}};
    std::mt19937_64 rng(1);
    const SurfaceSamples s = sample_tube_surface(tube, 20000, rng);
    REQUIRE(s.positions.size() == 20000);
    CHECK(s.cloud.positions.size() == 20000);
    std::size_t caps = 0;
    for (std::size_t i = 0; i < s.positions.size(); ++i) {
        CHECK(std::abs(tube.sdf(s.positions[i])) < 1e-6);
        CHECK(s.normals[i].norm() == doctest::Approx(1));
        if (s.part[i] != 0) ++caps;
    }
    // Wall 2 pi R L against two caps of pi R^2.
    const double expect = 2 * kPi * 100 / (2 * kPi * 10 * 120 + 2 * kPi * 100);
    CHECK(double(caps) / 20000 == doctest::Approx(expect).epsilon(0.1));
}

TEST_CASE("ray-traced depth matches the analytic cylinder intersection") {
    TubeSpec spec;
    spec.light.spot_inner = spec.light.spot_outer = Real(kPi);
    const Tube tube(spec);
    const Camera cam = Camera::look_at(Vec3(0, 0, 20), Vec3(0, 0, 40), Vec3(0, 1, 0), 20, 20, 32, 32);
    const RaytraceResult r = reference_raytrace(tube, cam, spec.light);
    CHECK(r.misses == 0);
    const Mat3 rt = cam.rotation.transpose();
    for (int y = 0; y < 32; y += 3)
        for (int x = 0; x < 32; x += 3) {
            const Eigen::Vector3d d = (rt * Vec3((x + Real(0.5) - 16) / 20, (y + Real(0.5) - 16) / 20, 1)).cast<double>();
            const double radial = std::hypot(d.x(), d.y());
            double s = 100 / d.z();  // far cap at z = 120
            if (radial > 0 && 10 / radial < s) s = 10 / radial;
            CHECK(r.depth[y * 32 + x] == doctest::Approx(s).epsilon(1e-4));
            CHECK(r.rgb[(y * 32 + x) * 3] >= 0);
        }
}

TEST_CASE("trajectory stays inside the tube and marks the held-out frames") {
    const TubeSpec spec = small_spec();
    const Tube tube(spec);
    std::mt19937_64 rng(3);
    const TubeCameras tc = tube_trajectory(tube, rng);
    REQUIRE(tc.cameras.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(tc.test[i] == (i % 3 == 2));
        CHECK(tube.sdf(tc.cameras[i].center().cast<double>()) > 0);
        CHECK_NOTHROW(tc.cameras[i].validate());
        CHECK(tc.cameras[i].fx == doctest::Approx(0.5 * 24 / std::tan(kPi * 50 / 180)));
    }
}

TEST_CASE("generated datasets are deterministic and survive a write and load") {
    const TubeSpec spec = small_spec();
    const Dataset a = make_tube_dataset(spec, 500, 9);
    const Dataset b = make_tube_dataset(spec, 500, 9);
    REQUIRE(a.frames.size() == 6);
    CHECK(a.frames[0].name == "0000");
    for (std::size_t i = 0; i < 6; ++i) CHECK(a.frames[i].rgb.data == b.frames[i].rgb.data);
    CHECK(a.points.positions == b.points.positions);
    CHECK(a.test_indices() == std::vector<std::size_t>{2, 5});

    const fs::path dir = scratch("rt");
    write_dataset(a, dir, true);
    CHECK(fs::exists(dir / "images" / "0003.png"));
    CHECK(fs::exists(dir / "images" / "0003.raw"));
    CHECK(fs::exists(dir / "depth" / "0003.json"));
    const Dataset c = load_dataset(dir);
    REQUIRE(c.frames.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(c.frames[i].rgb.data == a.frames[i].rgb.data);
        CHECK(c.frames[i].test == a.frames[i].test);
        CHECK((c.frames[i].camera.rotation - a.frames[i].camera.rotation).norm() < 1e-6);
        REQUIRE(c.frames[i].depth.has_value());
        for (std::size_t p = 0; p < c.frames[i].depth->data.size(); ++p)
            CHECK(std::abs(c.frames[i].depth->data[p] - a.frames[i].depth->data[p]) <= kDepthScaleMm * 0.5 + 1e-4);
    }
    REQUIRE(c.light.has_value());
    CHECK(c.light->intensity == a.light->intensity);
    CHECK(c.points.positions.size() == 500);

    // Without raw copies the images come back 8-bit quantized.
    const fs::path png_only = scratch("png");
    write_dataset(a, png_only, false);
    const Dataset d = load_dataset(png_only);
    const Image q = quantize8(a.frames[1].rgb);
    for (std::size_t p = 0; p < q.data.size(); ++p) CHECK(std::abs(d.frames[1].rgb.data[p] - q.data[p]) < 1e-6);
}

TEST_CASE("broken datasets raise dataset errors") {
    const fs::path empty = scratch("empty");
    CHECK_THROWS_AS(load_dataset(empty), DatasetError);
    const Dataset a = make_tube_dataset(small_spec(), 200, 2);
    const fs::path dir = scratch("broken");
    write_dataset(a, dir);
    fs::remove(dir / "images" / "0001.png");
    CHECK_THROWS_AS(load_dataset(dir), DatasetError);
}

TEST_CASE("poses and light documents round-trip") {
    const Camera cam = Camera::look_at(Vec3(1, 2, 3), Vec3(0, 0, 10), Vec3(0, 1, 0), 50, 60, 64, 48);
    const fs::path dir = scratch("poses");
    write_text_atomic(dir / "poses.json", poses_to_json({{"a", cam}, {"b", cam}}));
    const auto poses = load_poses(dir / "poses.json");
    REQUIRE(poses.size() == 2);
    CHECK(poses[1].first == "b");
    CHECK((poses[0].second.rotation - cam.rotation).norm() < 1e-6);
    CHECK(poses[0].second.fy == 60);
    LightRig rig = TubeSpec::default_light();
    const LightRig back = light_from_json(light_to_json(rig));
    CHECK((back.offset - rig.offset).norm() < 1e-6);
    CHECK(back.spot_outer == doctest::Approx(rig.spot_outer));
}

TEST_CASE("image codecs round-trip") {
    Image img(17, 5, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = Real((i * 37 % 101) / 100.0);
    const fs::path dir = scratch("img");
    write_raw(dir / "a.raw", img);
    CHECK(read_raw(dir / "a.raw").data == img.data);
    write_png8(dir / "a.png", img);
    const Image back = read_png8(dir / "a.png");
    const Image q = quantize8(img);
    CHECK(back.width == 17);
    for (std::size_t i = 0; i < q.data.size(); ++i) CHECK(std::abs(back.data[i] - q.data[i]) < 1e-6);
    for (int v = 0; v < 256; ++v) CHECK(encode_gamma8(decode_gamma8(std::uint8_t(v))) == v);
    Image depth(4, 4, 1, Real(12.3441));
    write_png16(dir / "d.png", depth, 0.01);
    CHECK(read_png16(dir / "d.png", 0.01).data[5] == doctest::Approx(12.34).epsilon(1e-5));
    CHECK_THROWS_AS(read_png8(dir / "missing.png"), ImageIoError);
}
