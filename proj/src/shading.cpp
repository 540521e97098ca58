// SPDX-License-Identifier: Apache-2.0
#include "lumen/shading.hpp"

#include <algorithm>
#include <cmath>

namespace lumen::inline LUMEN_ABI {

namespace {

constexpr Real kEps = static_cast<Real>(kShadeEps);
constexpr Real kPiR = static_cast<Real>(kPi);

Real clamp01(Real x) { return std::clamp(x, Real(0), Real(1)); }

// Zero gradient where a clamp to [0,1] is active.
Real clamp01_mask(Real x) { return (x >= Real(0) && x <= Real(1)) ? Real(1) : Real(0); }

}  // namespace

Partials2 ggx_d_partials(Real n_dot_h, Real roughness) {
    const Real r2 = roughness * roughness;
    const Real a2 = r2 * r2;  // alpha^2 with alpha = r^2
    const Real nh2 = n_dot_h * n_dot_h;
    const Real t = nh2 * (a2 - 1) + 1;
    const Real den = kPiR * t * t + kEps;
    const Real d = a2 / den;
    const Real d_den = -a2 / (den * den);
    const Real d_nh = d_den * kPiR * 2 * t * (2 * n_dot_h * (a2 - 1));
    const Real d_a2 = Real(1) / den + d_den * kPiR * 2 * t * nh2;
    const Real d_r = d_a2 * 4 * r2 * roughness;
    return {d, d_nh, d_r};
}

Real ggx_d(Real n_dot_h, Real roughness) { return ggx_d_partials(n_dot_h, roughness).value; }

Partials2 fresnel_schlick_partials(Real h_dot_c, Real f0) {
    const Real m = 1 - h_dot_c;
    const Real m2 = m * m;
    const Real m4 = m2 * m2;
    const Real m5 = m4 * m;
    return {f0 + (1 - f0) * m5, -5 * (1 - f0) * m4, 1 - m5};
}

Real fresnel_schlick(Real h_dot_c, Real f0) { return fresnel_schlick_partials(h_dot_c, f0).value; }

Partials3 geometry_schlick_beckmann_partials(Real n_dot_l, Real n_dot_c, Real roughness) {
    const Real k = roughness * roughness / 2;
    auto g1 = [k](Real x) {
        const Real den = x * (1 - k) + k + kEps;
        return Partials2{x / den, (k + kEps) / (den * den), -x * (1 - x) / (den * den)};
    };
    const Partials2 gl = g1(n_dot_l);
    const Partials2 gc = g1(n_dot_c);
    const Real dk = gl.d1 * gc.value + gl.value * gc.d1;
    return {gl.value * gc.value, gl.d0 * gc.value, gl.value * gc.d0, dk * roughness};
}

Real geometry_schlick_beckmann(Real n_dot_l, Real n_dot_c, Real roughness) {
    return geometry_schlick_beckmann_partials(n_dot_l, n_dot_c, roughness).value;
}

Real specular_term(const ShadingInputs& in) {
    const Real nl = in.normal.dot(in.light_dir);
    const Real nc = clamp01(in.normal.dot(in.view_dir));
    if (nl <= 0) return 0;
    const Vec3 h_raw = in.light_dir + in.view_dir;
    const Vec3 h = h_raw / (h_raw.norm() + kEps);
    const Real nh = clamp01(in.normal.dot(h));
    const Real hc = clamp01(h.dot(in.view_dir));
    const Real d = ggx_d(nh, in.roughness);
    const Real f = fresnel_schlick(hc, in.f0);
    const Real g = geometry_schlick_beckmann(std::min(nl, Real(1)), nc, in.roughness);
    return d * f * g / (4 * nl * nc + kEps);
}

Real attenuation(Real distance, const Vec3& coeffs) {
    return Real(1) / (coeffs[0] + coeffs[1] * distance + coeffs[2] * distance * distance);
}

SpotPartials spot_falloff_partials(Real cos_angle, Real inner, Real outer) {
    const Real c = std::clamp(cos_angle, Real(-1), Real(1));
    const Real angle = std::acos(c);
    if (angle <= inner) return {1, 0, 0, 0};
    if (angle >= outer) return {0, 0, 0, 0};
    const Real width = outer - inner;
    const Real t = (outer - angle) / width;
    const Real s = t * t * (3 - 2 * t);
    const Real ds_dt = 6 * t * (1 - t);
    const Real sin_angle = std::sqrt(std::max(Real(1) - c * c, kEps));
    const Real dangle_dcos = -Real(1) / sin_angle;
    const Real dt_dangle = -Real(1) / width;
    const Real dt_dinner = (outer - angle) / (width * width);
    const Real dt_douter = (angle - inner) / (width * width);
    return {s, ds_dt * dt_dangle * dangle_dcos, ds_dt * dt_dinner, ds_dt * dt_douter};
}

Real spot_falloff(Real cos_angle, const LightRig& rig) {
    return spot_falloff_partials(cos_angle, rig.spot_inner, rig.spot_outer).value;
}

Vec3 classic_diffuse(const Vec3& albedo) { return albedo / kPiR; }

namespace {

// Everything shade() computes, kept for the reverse pass.
struct ShadeTerms {
    Real nl, nc, nh, hc;
    Real nl_raw, nc_raw, nh_raw, hc_raw;
    Vec3 h_raw, h;
    Partials2 d, f;
    Partials3 g;
    Real spec_den, spec;
    Real att;
    SpotPartials spot;
};

ShadeTerms compute_terms(const ShadingInputs& in, const LightRig& rig) {
    ShadeTerms t{};
    t.nl_raw = in.normal.dot(in.light_dir);
    t.nl = t.nl_raw;
    t.nc_raw = in.normal.dot(in.view_dir);
    t.nc = clamp01(t.nc_raw);
    t.h_raw = in.light_dir + in.view_dir;
    t.h = t.h_raw / (t.h_raw.norm() + kEps);
    t.nh_raw = in.normal.dot(t.h);
    t.nh = clamp01(t.nh_raw);
    t.hc_raw = t.h.dot(in.view_dir);
    t.hc = clamp01(t.hc_raw);
    t.d = ggx_d_partials(t.nh, in.roughness);
    t.f = fresnel_schlick_partials(t.hc, in.f0);
    t.g = geometry_schlick_beckmann_partials(std::min(t.nl, Real(1)), t.nc, in.roughness);
    t.spec_den = 4 * t.nl * t.nc + kEps;
    t.spec = t.d.value * t.f.value * t.g.value / t.spec_den;
    t.att = attenuation(in.distance, rig.atten_coeffs);
    t.spot = spot_falloff_partials(in.forward.dot(-in.light_dir), rig.spot_inner, rig.spot_outer);
    return t;
}

}  // namespace

ShadedColor shade(const ShadingInputs& in, const Vec3& mlp_diffuse, const LightRig& rig) {
    ShadedColor out;
    const ShadeTerms t = compute_terms(in, rig);
    out.n_dot_l = t.nl;
    out.fresnel = t.f.value;
    if (t.nl <= 0) return out;
    const Real w = t.att * t.spot.value * t.nl;
    const Vec3 base = rig.intensity * w;
    out.diffuse = base.cwiseProduct(mlp_diffuse) * (1 - t.f.value);
    out.specular = base * t.spec;
    out.rgb = out.diffuse + out.specular;
    return out;
}

Vec3 relight_color(const ShadingInputs& in, const Vec3& mlp_diffuse, const LightRig& rig) {
    return shade(in, mlp_diffuse, rig).rgb;
}

ShadingGrad relight_color_backward(const ShadingInputs& in, const Vec3& mlp_diffuse,
                                   const LightRig& rig, const Vec3& grad_rgb) {
    ShadingGrad g;
    const ShadeTerms t = compute_terms(in, rig);
    if (t.nl <= 0) return g;
    const Real fr = t.f.value;
    const Real w = t.att * t.spot.value * t.nl;
    const Vec3 bracket = (mlp_diffuse * (1 - fr)).array() + t.spec;

    g.intensity = grad_rgb.cwiseProduct(bracket) * w;
    const Vec3 q = grad_rgb.cwiseProduct(rig.intensity) * w;
    g.mlp_diffuse = q * (1 - fr);
    Real d_f = -q.dot(mlp_diffuse);
    const Real d_spec = q.sum();
    const Real d_w = grad_rgb.cwiseProduct(rig.intensity).dot(bracket);

    const Real d_att = d_w * t.spot.value * t.nl;
    const Real d_spot = d_w * t.att * t.nl;
    Real d_nl = d_w * t.att * t.spot.value;

    // specular = D F G / (4 nl nc + eps)
    const Real dd = d_spec * t.f.value * t.g.value / t.spec_den;
    d_f += d_spec * t.d.value * t.g.value / t.spec_den;
    const Real dg = d_spec * t.d.value * t.f.value / t.spec_den;
    const Real d_den = -d_spec * t.spec / t.spec_den;
    d_nl += d_den * 4 * t.nc;
    Real d_nc = d_den * 4 * t.nl;

    if (t.nl <= Real(1)) d_nl += dg * t.g.d0;
    d_nc += dg * t.g.d1;
    g.roughness = dg * t.g.d2 + dd * t.d.d1;
    const Real d_nh = dd * t.d.d0;
    const Real d_hc = d_f * t.f.d0;
    g.f0 = d_f * t.f.d1;

    // attenuation = 1 / (kc + kl d + kq d^2)
    const Real att2 = t.att * t.att;
    g.distance = -d_att * att2 * (rig.atten_coeffs[1] + 2 * rig.atten_coeffs[2] * in.distance);
    g.atten_coeffs = Vec3(-d_att * att2, -d_att * att2 * in.distance,
                          -d_att * att2 * in.distance * in.distance);

    g.spot_inner = d_spot * t.spot.d_inner;
    g.spot_outer = d_spot * t.spot.d_outer;
    g.light_dir -= in.forward * (d_spot * t.spot.d_cos);

    // Dot products.
    g.normal += in.light_dir * d_nl;
    g.light_dir += in.normal * d_nl;
    const Real d_nc_raw = d_nc * clamp01_mask(t.nc_raw);
    g.normal += in.view_dir * d_nc_raw;
    g.view_dir += in.normal * d_nc_raw;
    Vec3 d_h = Vec3::Zero();
    const Real d_nh_raw = d_nh * clamp01_mask(t.nh_raw);
    g.normal += t.h * d_nh_raw;
    d_h += in.normal * d_nh_raw;
    const Real d_hc_raw = d_hc * clamp01_mask(t.hc_raw);
    d_h += in.view_dir * d_hc_raw;
    g.view_dir += t.h * d_hc_raw;

    // h = h_raw / (|h_raw| + eps)
    const Real len = t.h_raw.norm();
    const Real denom = len + kEps;
    const Vec3 d_hraw = d_h / denom - t.h_raw * (t.h_raw.dot(d_h) / (denom * denom * len));
    g.light_dir += d_hraw;
    g.view_dir += d_hraw;
    return g;
}

}  // namespace lumen::inline LUMEN_ABI
