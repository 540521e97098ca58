// SPDX-License-Identifier: Apache-2.0
#include "lumen/relight.hpp"

#include <algorithm>
#include <cmath>

namespace lumen::inline LUMEN_ABI {

OverrideError::OverrideError(std::string f, std::string message)
    : std::invalid_argument(f + ": " + message), field(std::move(f)), detail(std::move(message)) {}

bool RelightOverrides::empty() const {
    return !light_offset && intensity_scale == 1 && !spot_inner && !spot_outer && atten_scale == 1 &&
           !light_direction && roughness_scale == 1 && albedo_tint == Vec3::Ones();
}

void RelightOverrides::validate() const {
    auto scale = [](const char* field, Real v) {
        if (!(v >= 0 && v <= kMaxOverrideScale)) throw OverrideError(field, "must be in [0, 10]");
    };
    scale("intensity_scale", intensity_scale);
    scale("atten_scale", atten_scale);
    scale("roughness_scale", roughness_scale);
    for (int c = 0; c < 3; ++c) scale("albedo_tint", albedo_tint[c]);
    if (light_offset && !light_offset->allFinite()) throw OverrideError("offset", "must be finite");
    if (light_direction && !(light_direction->allFinite() && light_direction->norm() > 0))
        throw OverrideError("direction", "must be a nonzero vector");
    if (spot_inner && !(*spot_inner > 0 && *spot_inner <= Real(kPi)))
        throw OverrideError("spot_inner", "must be in (0, pi]");
    if (spot_outer && !(*spot_outer > 0 && *spot_outer <= Real(kPi)))
        throw OverrideError("spot_outer", "must be in (0, pi]");
}

RelightSetup apply_overrides(std::shared_ptr<const SceneModel> scene, const RelightOverrides& o,
                             RenderOptions options) {
    o.validate();
    RelightSetup setup;
    LightRig light = scene->light;
    if (o.light_offset) light.offset = *o.light_offset;
    light.intensity *= o.intensity_scale;
    light.atten_coeffs *= o.atten_scale;
    if (o.spot_inner) light.spot_inner = *o.spot_inner;
    if (o.spot_outer) light.spot_outer = *o.spot_outer;
    if (light.spot_inner > light.spot_outer) throw OverrideError("spot_inner", "must not exceed spot_outer");
    if (!(light.atten_coeffs.array() > 0).any()) throw OverrideError("atten_scale", "would zero the attenuation");
    if (o.light_direction) options.light_forward = o.light_direction->normalized();
    setup.light = light;

    if (o.roughness_scale != 1 || o.albedo_tint != Vec3::Ones()) {
        auto edited = std::make_shared<SceneModel>(*scene);
        constexpr Real lo = Real(1e-4), hi = 1 - Real(1e-4);
        for (auto& s : edited->splats) {
            if (o.roughness_scale != 1) s.set_roughness(std::clamp(s.roughness() * o.roughness_scale, lo, hi));
            if (o.albedo_tint != Vec3::Ones()) {
                Vec3 a = s.albedo().cwiseProduct(o.albedo_tint);
                for (int c = 0; c < 3; ++c) a[c] = std::clamp(a[c], lo, hi);
                s.set_albedo(a);
            }
        }
        setup.scene = std::move(edited);
    } else {
        setup.scene = std::move(scene);
    }
    setup.options = options;
    return setup;
}

RenderOutput render_relit(const RelightSetup& setup, const Camera& camera) {
    return render_view(*setup.scene, setup.light, camera, setup.options);
}

const std::vector<std::string>& buffer_names() {
    static const std::vector<std::string> names = {"rgb", "albedo", "diffuse", "specular", "normal", "depth"};
    return names;
}

Image buffer_image(const RenderOutput& out, const std::string& name) {
    const auto& buf = out.buffer(name);
    if (name == "depth") {
        Image img(out.width, out.height, 1);
        Real mx = 0;
        for (Real d : buf) mx = std::max(mx, d);
        for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = mx > 0 ? buf[i] / mx : 0;
        return img;
    }
    if (name == "alpha") {
        Image img(out.width, out.height, 1);
        std::copy(buf.begin(), buf.end(), img.data.begin());
        return img;
    }
    Image img(out.width, out.height, 3);
    if (buf.size() != img.data.size()) throw std::invalid_argument("buffer '" + name + "' was not rendered");
    if (name == "normal") {
        for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = (buf[i] + 1) / 2;
    } else {
        std::copy(buf.begin(), buf.end(), img.data.begin());
    }
    return img;
}

}  // namespace lumen::inline LUMEN_ABI
