// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lumen/deform.hpp"

namespace lumen::inline LUMEN_ABI {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Runs the lumensplat command line (args excludes the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Deformation document for the deform command:
///   {"type": "rigid", "rotation": [9 numbers, row-major] or "axis_angle_deg": [x, y, z, deg],
///    "translation": [x, y, z]}
///   {"type": "field", "transforms": [rigid, ...]}            one per splat
///   {"type": "cage", "min": [...], "max": [...], "cells": [nx, ny, nz],
///    "points": [[x, y, z], ...]} or "displacements": [{"index": [i, j, k], "offset": [...]}]
Deformation deformation_from_json(const std::string& text);

}  // namespace lumen::inline LUMEN_ABI
