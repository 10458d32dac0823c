#include "matxfer/procedural.hpp"

#include <cmath>
#include <stdexcept>

#include "matxfer/perlin.hpp"
#include "matxfer/rng.hpp"

namespace matxfer {

namespace {

void set_pixel(ParameterMaps& m, int x, int y, const Vec3& n, const Vec3& diff,
               float rough, const Vec3& spec) {
    float* np = m.normal_at(x, y);
    np[0] = static_cast<float>(n.x);
    np[1] = static_cast<float>(n.y);
    np[2] = static_cast<float>(n.z);
    float* dp = m.diffuse_at(x, y);
    dp[0] = static_cast<float>(diff.x);
    dp[1] = static_cast<float>(diff.y);
    dp[2] = static_cast<float>(diff.z);
    m.roughness_at(x, y) = rough;
    float* sp = m.specular_at(x, y);
    sp[0] = static_cast<float>(spec.x);
    sp[1] = static_cast<float>(spec.y);
    sp[2] = static_cast<float>(spec.z);
}

Vec3 random_color(Rng& rng, double lo, double hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

float random_roughness(Rng& rng) {
    return static_cast<float>(rng.uniform(0.05, 0.98));
}

// Normal tilted away from +z by `tilt` radians toward azimuth `phi`.
Vec3 tilted_normal(double tilt, double phi) {
    return {std::sin(tilt) * std::cos(phi), std::sin(tilt) * std::sin(phi), std::cos(tilt)};
}

ParameterMaps family_uniform(Rng& rng, int size) {
    Vec3 diff = random_color(rng, 0.03, 0.95);
    float rough = random_roughness(rng);
    Vec3 spec = random_color(rng, 0.02, 0.5);
    return constant_maps(size, size, {0, 0, 1}, diff, rough, spec);
}

ParameterMaps family_two_tone(Rng& rng, int size) {
    Vec3 diff_a = random_color(rng, 0.03, 0.95);
    Vec3 diff_b = random_color(rng, 0.03, 0.95);
    float rough_a = random_roughness(rng);
    float rough_b = random_roughness(rng);
    Vec3 spec_a = random_color(rng, 0.02, 0.5);
    Vec3 spec_b = random_color(rng, 0.02, 0.5);
    double tilt = rng.uniform(0.0, 0.35);
    double phi = rng.uniform(0.0, 6.283185307179586);
    Vec3 n_b = tilted_normal(tilt, phi);
    int periods = 2 + rng.uniform_int(4);
    NoiseField field = perlin_field(rng.next_u64(), periods, size, size);

    ParameterMaps m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            if (field.at(x, y) > 0.0f)
                set_pixel(m, x, y, {0, 0, 1}, diff_a, rough_a, spec_a);
            else
                set_pixel(m, x, y, n_b, diff_b, rough_b, spec_b);
        }
    return m;
}

ParameterMaps family_grid(Rng& rng, int size) {
    Vec3 tile_diff = random_color(rng, 0.15, 0.95);
    float tile_rough = static_cast<float>(rng.uniform(0.05, 0.5));
    Vec3 tile_spec = random_color(rng, 0.04, 0.5);
    Vec3 grout_diff = random_color(rng, 0.03, 0.3);
    float grout_rough = static_cast<float>(rng.uniform(0.6, 0.98));
    Vec3 grout_spec = random_color(rng, 0.02, 0.08);
    int cells = 3 + rng.uniform_int(5);
    int cell = size / cells;
    int grout = 1 + rng.uniform_int(std::max(1, cell / 8));

    ParameterMaps m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            bool on_grout = (x % cell) < grout || (y % cell) < grout;
            if (on_grout)
                set_pixel(m, x, y, {0, 0, 1}, grout_diff, grout_rough, grout_spec);
            else
                set_pixel(m, x, y, {0, 0, 1}, tile_diff, tile_rough, tile_spec);
        }
    return m;
}

ParameterMaps family_flakes(Rng& rng, int size) {
    Vec3 base_diff = random_color(rng, 0.02, 0.25);
    Vec3 spec = random_color(rng, 0.3, 0.9);
    float rough = static_cast<float>(rng.uniform(0.05, 0.25));
    double max_tilt = rng.uniform(0.1, 0.45);

    ParameterMaps m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double tilt = rng.uniform(0.0, max_tilt);
            double phi = rng.uniform(0.0, 6.283185307179586);
            set_pixel(m, x, y, tilted_normal(tilt, phi), base_diff, rough, spec);
        }
    return m;
}

} // namespace

ParameterMaps procedural_material_family(std::uint64_t seed, int size, int family) {
    if (size < 16) throw std::invalid_argument("procedural_material: size must be >= 16");
    Rng rng(seed, 7);
    switch (family) {
        case 0: return family_uniform(rng, size);
        case 1: return family_two_tone(rng, size);
        case 2: return family_grid(rng, size);
        case 3: return family_flakes(rng, size);
        default: throw std::invalid_argument("procedural_material: family must be 0..3");
    }
}

ParameterMaps procedural_material(std::uint64_t seed, int size) {
    Rng pick(seed, 6);
    return procedural_material_family(seed, size, pick.uniform_int(4));
}

} // namespace matxfer
