#include "matxfer/maps.hpp"

#include <cmath>
#include <stdexcept>

namespace matxfer {

ParameterMaps::ParameterMaps(int w, int h)
    : width(w), height(h),
      normal(static_cast<std::size_t>(w) * h * 3, 0.f),
      diffuse(static_cast<std::size_t>(w) * h * 3, 0.f),
      roughness(static_cast<std::size_t>(w) * h, kAlphaMin),
      specular(static_cast<std::size_t>(w) * h * 3, 0.f) {
    for (std::size_t p = 0; p < pixel_count(); ++p) normal[3 * p + 2] = 1.f;
}

ParameterMaps constant_maps(int w, int h, Vec3 n, Vec3 diff, float rough, Vec3 spec) {
    ParameterMaps m(w, h);
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
        m.normal[3 * p + 0] = static_cast<float>(n.x);
        m.normal[3 * p + 1] = static_cast<float>(n.y);
        m.normal[3 * p + 2] = static_cast<float>(n.z);
        m.diffuse[3 * p + 0] = static_cast<float>(diff.x);
        m.diffuse[3 * p + 1] = static_cast<float>(diff.y);
        m.diffuse[3 * p + 2] = static_cast<float>(diff.z);
        m.roughness[p] = rough;
        m.specular[3 * p + 0] = static_cast<float>(spec.x);
        m.specular[3 * p + 1] = static_cast<float>(spec.y);
        m.specular[3 * p + 2] = static_cast<float>(spec.z);
    }
    return m;
}

ParameterMaps crop_maps(const ParameterMaps& m, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || x0 + w > m.width || y0 + h > m.height)
        throw std::out_of_range("crop_maps: rectangle outside maps");
    ParameterMaps out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t src = m.pixel(x0 + x, y0 + y);
            std::size_t dst = out.pixel(x, y);
            for (int c = 0; c < 3; ++c) {
                out.normal[3 * dst + c] = m.normal[3 * src + c];
                out.diffuse[3 * dst + c] = m.diffuse[3 * src + c];
                out.specular[3 * dst + c] = m.specular[3 * src + c];
            }
            out.roughness[dst] = m.roughness[src];
        }
    }
    return out;
}

namespace {

void push_violation(ValidationReport& r, std::string map, long pixel, std::string rule) {
    if (r.items.size() < ValidationReport::kMaxStoredViolations)
        r.items.push_back({std::move(map), pixel, std::move(rule)});
    ++r.total;
}

} // namespace

ValidationReport validate_maps(const ParameterMaps& m) {
    ValidationReport r;
    const std::size_t n = m.pixel_count();
    if (m.normal.size() != 3 * n || m.diffuse.size() != 3 * n ||
        m.roughness.size() != n || m.specular.size() != 3 * n) {
        push_violation(r, "maps", -1, "storage size does not match width*height");
        return r;
    }
    constexpr float kTol = 1e-6f;
    for (std::size_t p = 0; p < n; ++p) {
        const float* nv = &m.normal[3 * p];
        float len = std::sqrt(nv[0] * nv[0] + nv[1] * nv[1] + nv[2] * nv[2]);
        if (std::fabs(len - 1.0f) > 1e-4f)
            push_violation(r, "normal", static_cast<long>(p), "length not 1 within 1e-4");
        if (!(nv[2] > 0.0f))
            push_violation(r, "normal", static_cast<long>(p), "z-component not positive");
        for (int c = 0; c < 3; ++c) {
            float d = m.diffuse[3 * p + c];
            if (!(d >= -kTol && d <= 1.0f + kTol))
                push_violation(r, "diffuse", static_cast<long>(p), "channel outside [0,1]");
            float s = m.specular[3 * p + c];
            if (!(s >= -kTol && s <= 1.0f + kTol))
                push_violation(r, "specular", static_cast<long>(p), "channel outside [0,1]");
        }
        float rough = m.roughness[p];
        if (!(rough >= kAlphaMin - kTol))
            push_violation(r, "roughness", static_cast<long>(p), "value below alpha_min");
        else if (!(rough <= 1.0f + kTol))
            push_violation(r, "roughness", static_cast<long>(p), "value above 1");
    }
    return r;
}

void encode_normal(const float n[3], float rgb[3]) {
    float len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (std::fabs(len - 1.0f) > 1e-3f)
        throw std::invalid_argument("encode_normal: input is not unit length");
    for (int c = 0; c < 3; ++c) rgb[c] = (n[c] + 1.0f) * 0.5f;
}

void decode_normal(const float rgb[3], float n[3]) {
    double v[3];
    for (int c = 0; c < 3; ++c) v[c] = 2.0 * rgb[c] - 1.0;
    // Blending can push z to or below zero; clamp before renormalizing.
    // This also maps the zero vector from rgb (0.5,0.5,0.5) to (0,0,1).
    if (v[2] <= 0.0) v[2] = 1e-3;
    double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    for (int c = 0; c < 3; ++c) n[c] = static_cast<float>(v[c] / len);
}

} // namespace matxfer
