#pragma once

#include <string>
#include <vector>

#include "matxfer/vec3.hpp"

namespace matxfer {

// Roughness floor. Keeps the GGX lobe away from the 1/alpha^2 singularity.
constexpr float kAlphaMin = 0.045f;

// The four per-pixel SVBRDF maps. Normals are tangent-space unit vectors
// with +z up; albedos are linear RGB in [0,1]; roughness is a scalar in
// [kAlphaMin, 1]. All maps share the same resolution.
struct ParameterMaps {
    int width = 0;
    int height = 0;
    std::vector<float> normal;    // 3 floats per pixel
    std::vector<float> diffuse;   // 3 floats per pixel
    std::vector<float> roughness; // 1 float per pixel
    std::vector<float> specular;  // 3 floats per pixel

    ParameterMaps() = default;
    ParameterMaps(int w, int h);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

    float* normal_at(int x, int y) { return &normal[3 * pixel(x, y)]; }
    const float* normal_at(int x, int y) const { return &normal[3 * pixel(x, y)]; }
    float* diffuse_at(int x, int y) { return &diffuse[3 * pixel(x, y)]; }
    const float* diffuse_at(int x, int y) const { return &diffuse[3 * pixel(x, y)]; }
    float& roughness_at(int x, int y) { return roughness[pixel(x, y)]; }
    float roughness_at(int x, int y) const { return roughness[pixel(x, y)]; }
    float* specular_at(int x, int y) { return &specular[3 * pixel(x, y)]; }
    const float* specular_at(int x, int y) const { return &specular[3 * pixel(x, y)]; }
};

// Constant material covering the whole map.
ParameterMaps constant_maps(int w, int h, Vec3 n, Vec3 diff, float rough, Vec3 spec);

ParameterMaps crop_maps(const ParameterMaps& m, int x0, int y0, int w, int h);

struct MapViolation {
    std::string map;   // "normal" | "diffuse" | "roughness" | "specular" | "maps"
    long pixel = -1;   // -1 for map-level violations
    std::string rule;
};

struct ValidationReport {
    std::vector<MapViolation> items; // capped at kMaxStoredViolations
    std::size_t total = 0;           // uncapped count
    bool ok() const { return total == 0; }
    static constexpr std::size_t kMaxStoredViolations = 1000;
};

// Pure check of every ParameterMaps invariant. Empty report iff all hold.
ValidationReport validate_maps(const ParameterMaps& m);

// Tangent-space normal <-> RGB in [0,1]: rgb = (n + 1) / 2.
// encode rejects clearly non-unit input; decode clamps z <= 0 to +1e-3
// before renormalizing, and maps the degenerate rgb (0.5,0.5,0.5) to (0,0,1).
void encode_normal(const float n[3], float rgb[3]);
void decode_normal(const float rgb[3], float n[3]);

} // namespace matxfer
