// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lumen/math.hpp"
#include "lumen/scene.hpp"

namespace lumen::inline LUMEN_ABI {

// Cook-Torrance shading for a point light next to the camera.
//
//                         D(h, r) * F(c, h, F0) * G(l, c, r)
//     f_specular(l, c) = ------------------------------------
//                              4 * (n.l) * (n.c)
//
//     rgb = I * att(d) * spot * (f_diffuse * (1 - F) + f_specular) * max(n.l, 0)
//
// where l points from the surface to the light, c from the surface to the
// camera and h = normalize(l + c). D is Trowbridge-Reitz GGX, F is Schlick's
// Fresnel approximation and G is the separable Schlick-Beckmann shadowing
// term with k = alpha / 2, alpha = roughness^2.

/// Value and the partial derivatives w.r.t. the two arguments.
struct Partials2 {
    Real value;
    Real d0;
    Real d1;
};

struct Partials3 {
    Real value;
    Real d0;
    Real d1;
    Real d2;
};

Real ggx_d(Real n_dot_h, Real roughness);
Partials2 ggx_d_partials(Real n_dot_h, Real roughness);

Real fresnel_schlick(Real h_dot_c, Real f0);
Partials2 fresnel_schlick_partials(Real h_dot_c, Real f0);

Real geometry_schlick_beckmann(Real n_dot_l, Real n_dot_c, Real roughness);
Partials3 geometry_schlick_beckmann_partials(Real n_dot_l, Real n_dot_c, Real roughness);

struct ShadingInputs {
    Vec3 light_dir;  ///< unit, surface -> light
    Vec3 view_dir;   ///< unit, surface -> camera
    Vec3 normal;     ///< unit
    Real distance;   ///< surface -> light
    Vec3 albedo;
    Real roughness;
    Real f0;
    /// Camera forward axis; the spotlight cone is measured from it.
    Vec3 forward = Vec3::UnitZ();
};

Real specular_term(const ShadingInputs& in);

Real attenuation(Real distance, const Vec3& coeffs);

/// 1 inside the inner cone, 0 outside the outer cone, smoothstep in angle
/// between the two.
Real spot_falloff(Real cos_angle, const LightRig& rig);

struct SpotPartials {
    Real value;
    Real d_cos;
    Real d_inner;
    Real d_outer;
};
SpotPartials spot_falloff_partials(Real cos_angle, Real inner, Real outer);

Vec3 classic_diffuse(const Vec3& albedo);

/// Relit color split into its diffuse and specular contributions
/// (rgb = diffuse + specular).
struct ShadedColor {
    Vec3 rgb = Vec3::Zero();
    Vec3 diffuse = Vec3::Zero();
    Vec3 specular = Vec3::Zero();
    Real fresnel = 0;
    Real n_dot_l = 0;
};

ShadedColor shade(const ShadingInputs& in, const Vec3& mlp_diffuse, const LightRig& rig);

Vec3 relight_color(const ShadingInputs& in, const Vec3& mlp_diffuse, const LightRig& rig);

struct ShadingGrad {
    Vec3 light_dir = Vec3::Zero();
    Vec3 view_dir = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    Real distance = 0;
    Vec3 mlp_diffuse = Vec3::Zero();
    Real roughness = 0;
    Real f0 = 0;
    Vec3 intensity = Vec3::Zero();
    Vec3 atten_coeffs = Vec3::Zero();
    Real spot_inner = 0;
    Real spot_outer = 0;
};

/// Reverse pass of relight_color for dLoss/drgb = grad_rgb.
ShadingGrad relight_color_backward(const ShadingInputs& in, const Vec3& mlp_diffuse,
                                   const LightRig& rig, const Vec3& grad_rgb);

}  // namespace lumen::inline LUMEN_ABI
