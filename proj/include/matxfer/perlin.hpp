#pragma once

#include <cstdint>
#include <vector>

namespace matxfer {

// 2D gradient noise field, roughly in [-1, 1], exactly 0 on lattice points.
struct NoiseField {
    int width = 0;
    int height = 0;
    int periods = 1; // lattice cells per axis
    std::vector<float> values;

    float at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
};

// Classic Perlin noise with `periods` cells across each axis and quintic
// fade. Gradients come from a seed-keyed hash of the lattice coordinates, so
// the field is deterministic in (seed, periods, w, h). Values are scaled by
// sqrt(2) so the range is close to [-1, 1].
NoiseField perlin_field(std::uint64_t seed, int periods, int w, int h);

// 1 where field > tau, else 0.
std::vector<std::uint8_t> threshold_mask(const NoiseField& f, float tau);

} // namespace matxfer
