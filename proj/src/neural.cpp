// SPDX-License-Identifier: Apache-2.0
#include "lumen/neural.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lumen::inline LUMEN_ABI {

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
    }
    return n;
}

bool MlpParams::all_finite() const {
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
    }
    return std::isfinite(distance_scale);
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
    MlpGrads g;
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
        g.weights.push_back(MatX::Zero(params.weights[k].rows(), params.weights[k].cols()));
        g.biases.push_back(VecX::Zero(params.biases[k].size()));
    }
    return g;
}

void MlpGrads::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
    if (other.weights.size() != weights.size()) {
        throw std::invalid_argument("MlpGrads: layer count mismatch");
    }
    for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] += other.weights[k];
        biases[k] += other.biases[k];
    }
    return *this;
}

MlpParams make_mlp(int hash_inputs, Real distance_scale, std::uint64_t seed,
                   std::vector<int> hidden, Activation activation) {
    if (hash_inputs < 0) throw std::invalid_argument("make_mlp: negative hash inputs");
    if (!(distance_scale > 0)) throw std::invalid_argument("make_mlp: distance_scale must be > 0");
    MlpParams p;
    p.activation = activation;
    p.distance_scale = distance_scale;
    p.layer_sizes.push_back(kMlpGeometricInputs + hash_inputs);
    for (int h : hidden) {
        if (h <= 0) throw std::invalid_argument("make_mlp: hidden width must be > 0");
        p.layer_sizes.push_back(h);
    }
    p.layer_sizes.push_back(1);

    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k + 1 < p.layer_sizes.size(); ++k) {
        const int in = p.layer_sizes[k];
        const int out = p.layer_sizes[k + 1];
        MatX w = MatX::Zero(out, in);
        VecX b = VecX::Zero(out);
        const bool last = k + 2 == p.layer_sizes.size();
        if (!last) {
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
            for (int r = 0; r < out; ++r)
                for (int c = 0; c < in; ++c) w(r, c) = static_cast<Real>(dist(rng));
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

void write_mlp_input(const Vec3& light_dir, Real distance, const Vec3& normal,
                     std::span<const Real> hash_features, Real distance_scale,
                     Eigen::Ref<VecX> out) {
    out.segment<3>(0) = light_dir;
    out[3] = distance / distance_scale;
    out.segment<3>(4) = normal;
    out[7] = light_dir.dot(normal);
    for (std::size_t i = 0; i < hash_features.size(); ++i) {
        out[kMlpGeometricInputs + static_cast<Eigen::Index>(i)] = hash_features[i];
    }
}

namespace {

void activate(Activation act, MatX& z) {
    if (act == Activation::Relu) z = z.cwiseMax(Real(0));
}

}  // namespace

MlpCache mlp_forward_batch(const MlpParams& params, MatX inputs) {
    if (inputs.rows() != params.input_dim()) {
        throw std::invalid_argument("mlp_forward_batch: expected " +
                                    std::to_string(params.input_dim()) + " inputs, got " +
                                    std::to_string(inputs.rows()));
    }
    if (!inputs.allFinite()) throw std::domain_error("mlp_forward_batch: non-finite input");
    MlpCache cache;
    cache.activations.reserve(params.weights.size());
    cache.activations.push_back(std::move(inputs));
    const std::size_t n_layers = params.weights.size();
    for (std::size_t k = 0; k + 1 < n_layers; ++k) {
        MatX z = params.weights[k] * cache.activations.back();
        z.colwise() += params.biases[k];
        activate(params.activation, z);
        cache.activations.push_back(std::move(z));
    }
    RowVecX raw = params.weights.back() * cache.activations.back();
    raw.array() += params.biases.back()[0];
    cache.multiplier = (Real(2) / (Real(1) + (-raw.array()).exp())).matrix();
    return cache;
}

MatX mlp_backward_batch(const MlpParams& params, const MlpCache& cache,
                        const RowVecX& grad_multiplier, MlpGrads& grads) {
    const std::size_t n_layers = params.weights.size();
    if (cache.activations.size() != n_layers ||
        grad_multiplier.size() != cache.multiplier.size() ||
        grads.weights.size() != n_layers) {
        throw std::invalid_argument("mlp_backward_batch: cache/batch mismatch");
    }
    // d m / d raw = 2 s (1 - s) = m (1 - m / 2)
    const auto& m = cache.multiplier.array();
    MatX delta = (grad_multiplier.array() * m * (Real(1) - m * Real(0.5))).matrix();
    for (std::size_t k = n_layers; k-- > 0;) {
        const MatX& input = cache.activations[k];
        grads.weights[k].noalias() += delta * input.transpose();
        grads.biases[k] += delta.rowwise().sum();
        MatX upstream = params.weights[k].transpose() * delta;
        if (k > 0 && params.activation == Activation::Relu) {
            upstream = (input.array() > Real(0)).select(upstream, Real(0));
        }
        delta = std::move(upstream);
    }
    return delta;
}

Real mlp_forward(const MlpParams& params, const Vec3& light_dir, Real distance,
                 const Vec3& normal, std::span<const Real> hash_features) {
    if (static_cast<int>(hash_features.size()) != params.hash_inputs()) {
        throw std::invalid_argument("mlp_forward: hash feature count mismatch");
    }
    if (!light_dir.allFinite() || !normal.allFinite() || !std::isfinite(distance)) {
        throw std::domain_error("mlp_forward: non-finite input");
    }
    MatX x(params.input_dim(), 1);
    write_mlp_input(light_dir, distance, normal, hash_features, params.distance_scale, x.col(0));
    return mlp_forward_batch(params, std::move(x)).multiplier[0];
}

// ---------------------------------------------------------------------------
// Hash grid

int HashGridParams::resolution(int level) const {
    return static_cast<int>(std::floor(base_resolution * std::pow(growth, Real(level))));
}

void HashGridParams::validate() const {
    if (levels <= 0 || features_per_level <= 0 || log2_table_size <= 0 || log2_table_size > 24) {
        throw std::invalid_argument("hash grid: bad dimensions");
    }
    for (int l = 1; l < levels; ++l) {
        if (resolution(l) <= resolution(l - 1)) {
            throw std::invalid_argument("hash grid: resolutions must strictly increase");
        }
    }
    if (!(bbox_max.array() > bbox_min.array()).all()) {
        throw std::invalid_argument("hash grid: empty bounding box");
    }
    const std::size_t expected =
        static_cast<std::size_t>(levels) * table_size() * static_cast<std::size_t>(features_per_level);
    if (table.size() != expected) throw std::invalid_argument("hash grid: table size mismatch");
}

HashGridParams make_hashgrid(const Vec3& bbox_min, const Vec3& bbox_max, std::uint64_t seed,
                             int levels, int log2_table_size, int features_per_level,
                             Real base_resolution, Real growth) {
    HashGridParams g;
    g.levels = levels;
    g.log2_table_size = log2_table_size;
    g.features_per_level = features_per_level;
    g.base_resolution = base_resolution;
    g.growth = growth;
    g.bbox_min = bbox_min;
    g.bbox_max = bbox_max;
    g.table.resize(static_cast<std::size_t>(levels) * g.table_size() *
                   static_cast<std::size_t>(features_per_level));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1e-4, 1e-4);
    for (auto& v : g.table) v = static_cast<Real>(dist(rng));
    g.validate();
    return g;
}

std::uint32_t hash_corner(std::int64_t i, std::int64_t j, std::int64_t k, std::uint32_t table_size) {
    const auto ui = static_cast<std::uint32_t>(i);
    const auto uj = static_cast<std::uint32_t>(j);
    const auto uk = static_cast<std::uint32_t>(k);
    const std::uint32_t h = ui ^ (uj * 2654435761u) ^ (uk * 805459861u);
    return h & (table_size - 1);
}

namespace {

struct GridLookup {
    Vec3 unit;          // position in [0,1]^3
    Vec3 inside;        // 1 where the coordinate was not clamped
};

GridLookup locate(const HashGridParams& grid, const Vec3& position) {
    GridLookup g;
    const Vec3 extent = grid.bbox_max - grid.bbox_min;
    for (int a = 0; a < 3; ++a) {
        const Real u = (position[a] - grid.bbox_min[a]) / extent[a];
        g.unit[a] = std::clamp(u, Real(0), Real(1));
        g.inside[a] = (u > Real(0) && u < Real(1)) ? Real(1) : Real(0);
    }
    return g;
}

template <typename Visit>
void for_each_corner(const HashGridParams& grid, int level, const Vec3& unit, Visit&& visit) {
    const Real res = static_cast<Real>(grid.resolution(level));
    const Vec3 x = unit * res;
    std::int64_t base[3];
    Vec3 frac;
    for (int a = 0; a < 3; ++a) {
        const Real f = std::floor(x[a]);
        base[a] = static_cast<std::int64_t>(f);
        frac[a] = x[a] - f;
    }
    for (int c = 0; c < 8; ++c) {
        const int bx = c & 1, by = (c >> 1) & 1, bz = (c >> 2) & 1;
        const Real wx = bx ? frac[0] : 1 - frac[0];
        const Real wy = by ? frac[1] : 1 - frac[1];
        const Real wz = bz ? frac[2] : 1 - frac[2];
        // d weight / d frac per axis
        const Vec3 dw(static_cast<Real>(bx ? 1 : -1) * wy * wz,
                      wx * static_cast<Real>(by ? 1 : -1) * wz,
                      wx * wy * static_cast<Real>(bz ? 1 : -1));
        const std::uint32_t idx =
            hash_corner(base[0] + bx, base[1] + by, base[2] + bz, grid.table_size());
        visit(idx, wx * wy * wz, dw, res);
    }
}

}  // namespace

std::vector<Real> hashgrid_encode(const HashGridParams& grid, const Vec3& position) {
    const int F = grid.features_per_level;
    std::vector<Real> out(static_cast<std::size_t>(grid.output_dim()), Real(0));
    const GridLookup look = locate(grid, position);
    for (int l = 0; l < grid.levels; ++l) {
        const std::size_t level_off = static_cast<std::size_t>(l) * grid.table_size() * F;
        for_each_corner(grid, l, look.unit, [&](std::uint32_t idx, Real w, const Vec3&, Real) {
            const Real* entry = grid.table.data() + level_off + static_cast<std::size_t>(idx) * F;
            for (int f = 0; f < F; ++f) out[static_cast<std::size_t>(l * F + f)] += w * entry[f];
        });
    }
    return out;
}

Vec3 hashgrid_backward(const HashGridParams& grid, const Vec3& position,
                       std::span<const Real> grad_features, std::span<Real> grad_table) {
    const int F = grid.features_per_level;
    if (grad_features.size() != static_cast<std::size_t>(grid.output_dim()) ||
        grad_table.size() != grid.table.size()) {
        throw std::invalid_argument("hashgrid_backward: size mismatch");
    }
    const GridLookup look = locate(grid, position);
    const Vec3 extent = grid.bbox_max - grid.bbox_min;
    Vec3 grad_unit = Vec3::Zero();
    for (int l = 0; l < grid.levels; ++l) {
        const std::size_t level_off = static_cast<std::size_t>(l) * grid.table_size() * F;
        for_each_corner(grid, l, look.unit, [&](std::uint32_t idx, Real w, const Vec3& dw, Real res) {
            const std::size_t off = level_off + static_cast<std::size_t>(idx) * F;
            Real dot = 0;
            for (int f = 0; f < F; ++f) {
                const Real g = grad_features[static_cast<std::size_t>(l * F + f)];
                grad_table[off + f] += w * g;
                dot += g * grid.table[off + f];
            }
            grad_unit += dw * (dot * res);
        });
    }
    return grad_unit.cwiseProduct(look.inside).cwiseQuotient(extent);
}

// ---------------------------------------------------------------------------
// Input noise

NoiseSample draw_noise(Real sigma, std::mt19937_64& rng) {
    NoiseSample s;
    if (sigma == Real(0)) return s;
    std::normal_distribution<double> dist(0.0, static_cast<double>(sigma));
    for (int a = 0; a < 3; ++a) s.light_dir[a] = static_cast<Real>(dist(rng));
    s.distance = static_cast<Real>(dist(rng));
    for (int a = 0; a < 3; ++a) s.normal[a] = static_cast<Real>(dist(rng));
    return s;
}

NoisyInputs apply_noise(const Vec3& light_dir, Real distance, const Vec3& normal,
                        const NoiseSample& noise) {
    return {(light_dir + noise.light_dir).normalized(), distance * (Real(1) + noise.distance),
            (normal + noise.normal).normalized()};
}

NoisyInputs inject_noise(const Vec3& light_dir, Real distance, const Vec3& normal, Real sigma,
                         std::mt19937_64& rng) {
    if (sigma == Real(0)) return {light_dir, distance, normal};
    return apply_noise(light_dir, distance, normal, draw_noise(sigma, rng));
}

}  // namespace lumen::inline LUMEN_ABI
