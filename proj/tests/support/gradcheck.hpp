// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Finite-difference checks of the full render + loss reverse pass, built
// against the double-precision core. Kept free of lumen types so it can be
// called from translation units compiled at either precision.
namespace gradcheck {

struct GroupReport {
    std::string group;
    int checked = 0;
    double max_rel_error = 0;
    std::string worst;  // description of the worst entry
};

struct Options {
    std::uint64_t seed = 7;
    int splats = 4;
    double step = 1e-6;
    /// Denominator floor of the relative error.
    double floor = 1e-6;
    bool with_noise = true;
    bool with_hash = true;
};

std::vector<GroupReport> check_render_gradients(const Options& options = {});

/// Loss-level checks: D-SSIM, depth, normal-from-depth, diffuse, tissue.
std::vector<GroupReport> check_loss_gradients(std::uint64_t seed = 11);

}  // namespace gradcheck
