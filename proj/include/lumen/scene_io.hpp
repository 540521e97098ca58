// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

// Binary scene file; layout in docs/format.md.

class SceneFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wrong magic bytes or an impossible header.
class SceneHeaderError : public SceneFormatError {
public:
    using SceneFormatError::SceneFormatError;
};

/// The file ends before a declared buffer does.
class SceneTruncatedError : public SceneFormatError {
public:
    using SceneFormatError::SceneFormatError;
};

class SceneVersionError : public SceneFormatError {
public:
    using SceneFormatError::SceneFormatError;
};

inline constexpr char kSceneMagic[8] = {'P', 'R', 'S', 'P', 'L', 'A', 'T', '1'};
inline constexpr std::uint32_t kFlagHashGrid = 1u << 0;

std::vector<std::uint8_t> encode_scene(const SceneModel& scene);
SceneModel decode_scene(const std::vector<std::uint8_t>& bytes);

void save_scene(const SceneModel& scene, const std::filesystem::path& path);
SceneModel load_scene(const std::filesystem::path& path);

}  // namespace lumen::inline LUMEN_ABI
