// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scalar precision. The production library is float; the gradient-check
// build defines LUMEN_USE_DOUBLE=1. Both variants live in distinct inline
// namespaces so they can be linked into one executable.
#if defined(LUMEN_USE_DOUBLE) && LUMEN_USE_DOUBLE
#define LUMEN_ABI f64
#else
#define LUMEN_ABI f32
#endif

namespace lumen::inline LUMEN_ABI {

#if defined(LUMEN_USE_DOUBLE) && LUMEN_USE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

inline constexpr double kPi = 3.14159265358979323846;

/// Standard deviation given to the flat axis of every splat (world units).
inline constexpr double kFlatEpsilon = 1e-6;

/// Guard added to shading denominators.
inline constexpr double kShadeEps = 1e-7;

}  // namespace lumen::inline LUMEN_ABI
