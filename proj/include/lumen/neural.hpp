// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lumen/math.hpp"

namespace lumen::inline LUMEN_ABI {

using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RowVecX = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

enum class Activation : std::uint32_t { Relu = 0, Identity = 1 };

/// Number of geometric inputs: light dir (3), scaled distance (1),
/// normal (3), cosine term (1).
inline constexpr int kMlpGeometricInputs = 8;

/// Weights of the diffuse-multiplier network. Layer k maps
/// layer_sizes[k] -> layer_sizes[k + 1]; the last layer has one output.
struct MlpParams {
    std::vector<int> layer_sizes;
    Activation activation = Activation::Relu;
    /// Distances are divided by this before entering the network.
    Real distance_scale = 1;
    std::vector<MatX> weights;
    std::vector<VecX> biases;

    int input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    int hash_inputs() const { return input_dim() - kMlpGeometricInputs; }
    std::size_t parameter_count() const;
    bool all_finite() const;
};

struct MlpGrads {
    std::vector<MatX> weights;
    std::vector<VecX> biases;

    static MlpGrads zeros_like(const MlpParams& params);
    void set_zero();
    MlpGrads& operator+=(const MlpGrads& other);
};

/// Builds a network with He-initialized hidden layers and a zero output
/// layer, so the multiplier is exactly 1 for every input.
MlpParams make_mlp(int hash_inputs, Real distance_scale, std::uint64_t seed,
                   std::vector<int> hidden = {64, 64, 64},
                   Activation activation = Activation::Relu);

/// Geometric network inputs for one evaluation, with optional hash features.
void write_mlp_input(const Vec3& light_dir, Real distance, const Vec3& normal,
                     std::span<const Real> hash_features, Real distance_scale,
                     Eigen::Ref<VecX> out);

/// Intermediate activations of a batched forward pass.
struct MlpCache {
    /// activations[0] is the input batch; activations[k] is the output of
    /// hidden layer k. One column per evaluation.
    std::vector<MatX> activations;
    RowVecX multiplier;
};

/// Batched forward: one column of `inputs` per evaluation. Returns the
/// multiplier m = 2 sigmoid(raw) in (0, 2) for every column.
MlpCache mlp_forward_batch(const MlpParams& params, MatX inputs);

/// Reverse pass. `grad_multiplier` holds dLoss/dm per column. Parameter
/// gradients are accumulated into `grads`; the returned matrix holds
/// dLoss/dinput per column.
MatX mlp_backward_batch(const MlpParams& params, const MlpCache& cache,
                        const RowVecX& grad_multiplier, MlpGrads& grads);

/// Single evaluation of the multiplier for geometric inputs in the
/// camera frame.
Real mlp_forward(const MlpParams& params, const Vec3& light_dir, Real distance,
                 const Vec3& normal, std::span<const Real> hash_features = {});

/// Multi-resolution hash encoding of the light position.
struct HashGridParams {
    int levels = 8;
    int log2_table_size = 14;
    int features_per_level = 2;
    Real base_resolution = 16;
    Real growth = Real(1.5);
    Vec3 bbox_min = Vec3::Constant(-1);
    Vec3 bbox_max = Vec3::Constant(1);
    /// levels x table_size x features, row-major.
    std::vector<Real> table;

    std::uint32_t table_size() const { return 1u << log2_table_size; }
    int output_dim() const { return levels * features_per_level; }
    int resolution(int level) const;
    void validate() const;
};

HashGridParams make_hashgrid(const Vec3& bbox_min, const Vec3& bbox_max,
                             std::uint64_t seed, int levels = 8,
                             int log2_table_size = 14, int features_per_level = 2,
                             Real base_resolution = 16, Real growth = Real(1.5));

std::uint32_t hash_corner(std::int64_t i, std::int64_t j, std::int64_t k,
                          std::uint32_t table_size);

std::vector<Real> hashgrid_encode(const HashGridParams& grid, const Vec3& position);

/// Accumulates the table gradient into `grad_table` (same layout as
/// grid.table) and returns dLoss/dposition.
Vec3 hashgrid_backward(const HashGridParams& grid, const Vec3& position,
                       std::span<const Real> grad_features,
                       std::span<Real> grad_table);

struct NoisyInputs {
    Vec3 light_dir;
    Real distance;
    Vec3 normal;
};

/// Raw Gaussian draws for one perturbation.
struct NoiseSample {
    Vec3 light_dir = Vec3::Zero();
    Real distance = 0;
    Vec3 normal = Vec3::Zero();
};

NoiseSample draw_noise(Real sigma, std::mt19937_64& rng);

/// Directions are offset and renormalized; distance is scaled by (1 + noise).
NoisyInputs apply_noise(const Vec3& light_dir, Real distance, const Vec3& normal,
                        const NoiseSample& noise);

/// Training-time perturbation of the network inputs.
NoisyInputs inject_noise(const Vec3& light_dir, Real distance, const Vec3& normal,
                         Real sigma, std::mt19937_64& rng);

}  // namespace lumen::inline LUMEN_ABI
