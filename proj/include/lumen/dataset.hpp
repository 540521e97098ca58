// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lumen/image.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Frame {
    std::string name;
    Camera camera;
    Image rgb;                  // linear, 3 channels
    std::optional<Image> depth; // camera z, world units
    bool test = false;
};

/// Oriented surface samples used to seed a scene.
struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
};

struct Dataset {
    std::vector<Frame> frames;
    PointCloud points;
    /// Calibrated light, when the capture provides one.
    std::optional<LightRig> light;

    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> test_indices() const;
    void validate() const;
};

/// World units per 16-bit depth count in written datasets (world units are
/// millimetres for generated scenes).
inline constexpr double kDepthScaleMm = 0.01;

/// Layout:
///   images/NNNN.png     8-bit gamma-encoded RGB
///   depth/NNNN.png      16-bit depth, depth/NNNN.json {"scale_mm": s}
///   poses.json          intrinsics and world_to_camera per frame
///   split.json          {"train": [...], "test": [...]}
///   points.csv          x,y,z,nx,ny,nz per line (optional)
///   light.json          calibrated light rig (optional)
/// With `raw`, images/NNNN.raw linear float copies are written too; the
/// loader prefers them over the PNGs.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir, bool raw = false);
Dataset load_dataset(const std::filesystem::path& dir);

/// poses.json style camera list, shared with the render command.
std::vector<std::pair<std::string, Camera>> load_poses(const std::filesystem::path& path);
std::string poses_to_json(const std::vector<std::pair<std::string, Camera>>& poses);

std::string light_to_json(const LightRig& light);
LightRig light_from_json(const std::string& text);

}  // namespace lumen::inline LUMEN_ABI
