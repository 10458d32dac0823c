#pragma once

#include <cstdint>

#include "matxfer/image.hpp"
#include "matxfer/maps.hpp"
#include "matxfer/rng.hpp"
#include "matxfer/vec3.hpp"

namespace matxfer {

// One texel's worth of Cook-Torrance parameters.
struct TexelBrdf {
    Vec3 n{0, 0, 1};      // unit, z > 0
    Vec3 rho_d{0, 0, 0};  // diffuse albedo, [0,1]
    Vec3 rho_s{0, 0, 0};  // specular albedo, [0,1]
    double alpha = 0.5;   // GGX roughness, [kAlphaMin, 1]
};

struct DirectionalLight {
    Vec3 dir{0, 0, 1};        // surface toward light, unit, z > 0
    Vec3 intensity{1, 1, 1};  // RGB radiance
};

struct ViewSpec {
    Vec3 dir{0, 0, 1}; // toward the viewer, unit, z > 0
};

// White dome stand-in: adds k_a * (rho_d + rho_s) to every texel.
struct AmbientTerm {
    double k_a = 0.1;
};

struct LightDistribution {
    double elevation_min_deg = 20.0; // from the surface plane
    double elevation_max_deg = 90.0;
    double intensity_min = 1.0;
    double intensity_max = 4.0;
    double gray_prob = 0.5; // equal-channel intensity with this probability
};

// GGX distribution, Schlick Fresnel, Smith height-uncorrelated G:
//   out = I * max(n.l,0) * [rho_d/pi + D*F*G / (4 (n.l)(n.v))] + k_a*(rho_d+rho_s)
// with the specular term zeroed when n.l <= 0 or n.v <= 0.
Vec3 shade_texel(const TexelBrdf& t, const DirectionalLight& l,
                 const ViewSpec& v, const AmbientTerm& a);

// Partial derivatives of each output channel. rho_d/rho_s derivatives are
// diagonal (channel c of the output only sees channel c of the albedos).
struct ShadeGradient {
    double d_n[3][3];   // [out channel][normal component]
    double d_rho_d[3];
    double d_rho_s[3];
    double d_alpha[3];
};

// Analytic gradient of shade_texel, treating n as a free 3-vector.
// Below the horizon guard (n.l or n.v <= 1e-4) the specular part is
// assigned the zero subgradient.
ShadeGradient shade_texel_gradient(const TexelBrdf& t, const DirectionalLight& l,
                                   const ViewSpec& v, const AmbientTerm& a);

// Per-pixel shade_texel over the maps. Normals are renormalized before
// shading so post-blend maps are safe to render.
ImageBuffer render_image(const ParameterMaps& m, const DirectionalLight& l,
                         const ViewSpec& v, const AmbientTerm& a);

DirectionalLight sample_light(Rng& rng, const LightDistribution& d);
DirectionalLight sample_light(std::uint64_t seed, const LightDistribution& d);

} // namespace matxfer
