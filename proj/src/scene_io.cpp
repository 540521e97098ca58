// SPDX-License-Identifier: Apache-2.0
#include "lumen/scene_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lumen/image.hpp"

namespace lumen::inline LUMEN_ABI {

namespace {

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(Real v) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        u32(bits);
    }
    template <class V>
    void vec(const V& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f32(v[i]);
    }
    std::size_t size() const { return out_.size(); }
    // Reserves a u64 length slot; finish_block() back-fills it.
    std::size_t begin_block() {
        const std::size_t at = out_.size();
        u64(0);
        return at;
    }
    void finish_block(std::size_t at) {
        const std::uint64_t len = out_.size() - at - 8;
        for (int i = 0; i < 8; ++i) out_[at + i] = static_cast<std::uint8_t>(len >> (8 * i));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    void need(std::size_t n, const char* what) const {
        if (n > in_.size() - pos_)
            throw SceneTruncatedError(std::string("scene file truncated in ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    Real f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, 4);
        return static_cast<Real>(f);
    }
    template <class V>
    void vec(V& v, const char* what) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f32(what);
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return in_.size() - pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

void write_mlp(Writer& w, const MlpParams& mlp) {
    const std::size_t at = w.begin_block();
    w.u32(static_cast<std::uint32_t>(mlp.activation));
    w.u32(static_cast<std::uint32_t>(mlp.layer_sizes.size()));
    for (int s : mlp.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
    w.f32(mlp.distance_scale);
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        const MatX& m = mlp.weights[l];
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(m(r, c));
        w.vec(mlp.biases[l]);
    }
    w.finish_block(at);
}

MlpParams read_mlp(Reader& r) {
    const std::uint64_t len = r.u64("network block length");
    r.need(len, "network block");
    const std::size_t end = r.pos() + len;
    MlpParams mlp;
    const std::uint32_t act = r.u32("network block");
    if (act > static_cast<std::uint32_t>(Activation::Identity)) throw SceneFormatError("unknown network activation");
    mlp.activation = static_cast<Activation>(act);
    const std::uint32_t n_sizes = r.u32("network block");
    if (n_sizes < 2 || n_sizes > 64) throw SceneFormatError("bad network layer count");
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
        const std::uint32_t s = r.u32("network block");
        if (s == 0 || s > 4096) throw SceneFormatError("bad network layer width");
        mlp.layer_sizes.push_back(static_cast<int>(s));
    }
    if (mlp.layer_sizes.back() != 1) throw SceneFormatError("network must have a single output");
    if (mlp.layer_sizes.front() < kMlpGeometricInputs) throw SceneFormatError("network input too narrow");
    mlp.distance_scale = r.f32("network block");
    for (std::size_t l = 0; l + 1 < mlp.layer_sizes.size(); ++l) {
        MatX m(mlp.layer_sizes[l + 1], mlp.layer_sizes[l]);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f32("network weights");
        VecX b(mlp.layer_sizes[l + 1]);
        r.vec(b, "network biases");
        mlp.weights.push_back(std::move(m));
        mlp.biases.push_back(std::move(b));
    }
    if (r.pos() != end) throw SceneFormatError("network block length does not match its contents");
    return mlp;
}

void write_hash(Writer& w, const HashGridParams& g) {
    const std::size_t at = w.begin_block();
    w.u32(static_cast<std::uint32_t>(g.levels));
    w.u32(static_cast<std::uint32_t>(g.log2_table_size));
    w.u32(static_cast<std::uint32_t>(g.features_per_level));
    w.f32(g.base_resolution);
    w.f32(g.growth);
    w.vec(g.bbox_min);
    w.vec(g.bbox_max);
    for (Real v : g.table) w.f32(v);
    w.finish_block(at);
}

HashGridParams read_hash(Reader& r) {
    const std::uint64_t len = r.u64("hash block length");
    r.need(len, "hash block");
    const std::size_t end = r.pos() + len;
    HashGridParams g;
    g.levels = static_cast<int>(r.u32("hash block"));
    g.log2_table_size = static_cast<int>(r.u32("hash block"));
    g.features_per_level = static_cast<int>(r.u32("hash block"));
    if (g.levels <= 0 || g.levels > 32 || g.log2_table_size <= 0 || g.log2_table_size > 24 ||
        g.features_per_level <= 0 || g.features_per_level > 16)
        throw SceneFormatError("bad hash grid dimensions");
    g.base_resolution = r.f32("hash block");
    g.growth = r.f32("hash block");
    r.vec(g.bbox_min, "hash block");
    r.vec(g.bbox_max, "hash block");
    const std::size_t n = static_cast<std::size_t>(g.levels) * g.table_size() * static_cast<std::size_t>(g.features_per_level);
    if (end - r.pos() != n * 4) throw SceneFormatError("hash block length does not match its contents");
    g.table.resize(n);
    for (auto& v : g.table) v = r.f32("hash table");
    return g;
}

}  // namespace

std::vector<std::uint8_t> encode_scene(const SceneModel& scene) {
    Writer w;
    w.bytes(kSceneMagic, sizeof(kSceneMagic));
    w.u32(scene.format_version);
    w.u64(scene.splats.size());
    w.u32(scene.hash ? kFlagHashGrid : 0u);
    const auto& sp = scene.splats;
    for (const auto& s : sp) w.vec(s.position);
    for (const auto& s : sp) w.vec(s.rotation);
    for (const auto& s : sp) w.vec(s.log_scale);
    for (const auto& s : sp) w.f32(s.opacity_logit);
    for (const auto& s : sp) w.vec(s.albedo_logit);
    for (const auto& s : sp) w.f32(s.roughness_logit);
    for (const auto& s : sp) w.f32(s.f0_logit);
    const LightRig& l = scene.light;
    w.vec(l.offset);
    w.vec(l.intensity);
    w.vec(l.atten_coeffs);
    w.f32(l.spot_inner);
    w.f32(l.spot_outer);
    write_mlp(w, scene.mlp);
    if (scene.hash) write_hash(w, *scene.hash);
    return w.take();
}

SceneModel decode_scene(const std::vector<std::uint8_t>& bytes) {
    if (bytes.empty()) throw SceneTruncatedError("scene file is empty");
    const std::size_t head = std::min(bytes.size(), sizeof(kSceneMagic));
    if (std::memcmp(bytes.data(), kSceneMagic, head) != 0) throw SceneHeaderError("not a scene file (bad magic)");
    if (head < sizeof(kSceneMagic)) throw SceneTruncatedError("scene file truncated in header");
    Reader r(bytes);
    r.skip(sizeof(kSceneMagic));
    SceneModel scene;
    scene.format_version = r.u32("header");
    if (scene.format_version != SceneModel::kFormatVersion)
        throw SceneVersionError("unsupported scene format version " + std::to_string(scene.format_version));
    const std::uint64_t count = r.u64("header");
    const std::uint32_t flags = r.u32("header");
    if (flags & ~kFlagHashGrid) throw SceneHeaderError("unknown header flags");
    // 16 floats per splat; reject counts that cannot fit before allocating.
    if (count == 0) throw SceneHeaderError("scene file declares no splats");
    if (count > r.remaining() / (16 * 4)) throw SceneTruncatedError("scene file truncated in splat arrays");
    auto& sp = scene.splats;
    sp.resize(count);
    for (auto& s : sp) r.vec(s.position, "positions");
    for (auto& s : sp) r.vec(s.rotation, "rotations");
    for (auto& s : sp) r.vec(s.log_scale, "scales");
    for (auto& s : sp) s.opacity_logit = r.f32("opacities");
    for (auto& s : sp) r.vec(s.albedo_logit, "albedo");
    for (auto& s : sp) s.roughness_logit = r.f32("roughness");
    for (auto& s : sp) s.f0_logit = r.f32("f0");
    LightRig& l = scene.light;
    r.vec(l.offset, "light block");
    r.vec(l.intensity, "light block");
    r.vec(l.atten_coeffs, "light block");
    l.spot_inner = r.f32("light block");
    l.spot_outer = r.f32("light block");
    scene.mlp = read_mlp(r);
    if (flags & kFlagHashGrid) scene.hash = read_hash(r);
    if (r.remaining() != 0) throw SceneFormatError("trailing bytes after scene data");
    try {
        scene.validate();
    } catch (const std::invalid_argument& e) {
        throw SceneFormatError(std::string("invalid scene contents: ") + e.what());
    }
    return scene;
}

void save_scene(const SceneModel& scene, const std::filesystem::path& path) {
    scene.validate();
    write_file_atomic(path, encode_scene(scene));
}

SceneModel load_scene(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scene file " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_scene(bytes);
}

}  // namespace lumen::inline LUMEN_ABI
