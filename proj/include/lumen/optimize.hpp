// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lumen/dataset.hpp"
#include "lumen/losses.hpp"
#include "lumen/renderer.hpp"

namespace lumen::inline LUMEN_ABI {

struct AdamConfig {
    Real lr = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-8);
};

struct AdamState {
    std::vector<Real> m;
    std::vector<Real> v;
    std::int64_t step = 0;

    void resize(std::size_t n);
};

/// One bias-corrected Adam step in place.
void adam_update(std::span<Real> params, std::span<const Real> grads, AdamState& state, const AdamConfig& config);

struct LearningRates {
    /// Multiplied by the scene radius (half the bounding-box diagonal).
    Real position = Real(2e-4);
    Real rotation = Real(1e-3);
    Real scale = Real(5e-3);
    Real opacity = Real(5e-2);
    Real material = Real(1e-2);
    Real light = Real(1e-3);
    Real mlp = Real(1e-3);
    Real hash = Real(1e-3);
};

struct DensifyConfig {
    bool enabled = false;
    int start = 200;
    int interval = 200;
    int stop = 2000;
    /// Mean screen-space gradient norm above which a splat is cloned or split.
    Real grad_threshold = Real(2e-4);
    /// Splats whose largest scale exceeds this fraction of the scene radius are split.
    Real split_scale = Real(0.02);
    Real prune_opacity = Real(0.005);
    std::size_t max_splats = 200000;
};

struct TrainConfig {
    int iterations = 3000;
    LearningRates lr;
    LossWeights weights;
    Real noise_sigma = Real(0.02);
    bool use_hash = false;
    DensifyConfig densify;
    std::uint64_t seed = 0;
    int log_every = 100;
    int checkpoint_every = 0;
    std::filesystem::path checkpoint_dir;
    int threads = 0;

    void validate() const;
};

/// Thrown when a loss term or gradient stops being finite.
class NumericError : public std::runtime_error {
public:
    NumericError(int iteration, std::string term);
    int iteration;
    std::string term;
};

struct LogRow {
    int iteration = 0;
    Real total = 0;
    LossTerms terms;
    /// Mean PSNR over the held-out frames; NaN when there are none.
    Real test_psnr = 0;
    std::size_t splats = 0;
};

struct TrainResult {
    SceneModel scene;
    std::vector<LogRow> log;
};

std::string log_csv_header();
std::string log_csv_row(const LogRow& row);
std::string log_to_csv(const std::vector<LogRow>& log);

/// Splats from an oriented point cloud, with a fresh network (and hash grid
/// when `use_hash`). Radii follow the local sample spacing.
SceneModel initialize_scene(const PointCloud& points, const LightRig& light, bool use_hash, std::uint64_t seed,
                            Real albedo = Real(0.5), Real roughness = Real(0.5), Real f0 = Real(0.02),
                            Real opacity = Real(0.8));

/// Half the bounding-box diagonal of the splat centers (at least 1e-6).
Real scene_radius(const SceneModel& scene);

/// Loss terms and output gradients for one rendered view.
struct ViewLoss {
    LossTerms terms;
    Real total = 0;
    OutputGrads upstream;
    /// Direct gradients on constrained materials (diffuse and tissue terms).
    std::vector<Vec3> grad_albedo;
    std::vector<Real> grad_roughness;
    std::vector<Real> grad_f0;
};

ViewLoss evaluate_view_loss(const SceneModel& scene, const Frame& frame, const RenderOutput& out,
                            const ViewCache& cache, const LossWeights& weights);

/// Full gradient of the total loss for one view (render + losses + backward).
Real loss_and_gradients(const SceneModel& scene, const Frame& frame, const RenderOptions& options,
                        const LossWeights& weights, SceneGradients& grads, LossTerms* terms = nullptr);

using ProgressFn = std::function<void(const LogRow&)>;

TrainResult train(SceneModel scene, const Dataset& dataset, const TrainConfig& config,
                  const ProgressFn& progress = {});

struct DensifyResult {
    SceneModel scene;
    /// For each output splat, the input splat it came from.
    std::vector<std::size_t> origin;
    /// True for splats created by a clone or split.
    std::vector<bool> fresh;
    std::size_t cloned = 0, split = 0, pruned = 0;
};

/// `mean_grad` is the accumulated screen-space gradient norm per splat
/// divided by the number of views it was visible in.
DensifyResult densify_prune(const SceneModel& scene, std::span<const Real> mean_grad, const DensifyConfig& config,
                            std::uint64_t seed);

/// Mean PSNR of noise-free renders against the given frames.
Real mean_psnr(const SceneModel& scene, const Dataset& dataset, std::span<const std::size_t> frames,
               const RenderOptions& options = {});

}  // namespace lumen::inline LUMEN_ABI
