#pragma once

#include <cstdint>
#include <vector>

#include "matxfer/brdf.hpp"
#include "matxfer/image.hpp"
#include "matxfer/maps.hpp"
#include "matxfer/rng.hpp"

namespace matxfer {

// Exemplar patches the fine-tuned network learns from. Every patch must be
// at least crop size in both dimensions.
struct ExemplarSet {
    std::vector<ParameterMaps> patches;
};

struct AugmentConfig {
    int crop = 64;             // train tile size
    double scale_min = 0.5;    // resampling factor range
    double scale_max = 2.0;
    int periods_min = 2;       // Perlin cells across the crop
    int periods_max = 4;
    double tau_min = -0.2;     // mask threshold range
    double tau_max = 0.2;
};

// Throws DataError naming the first offending patch.
void validate_exemplar_set(const ExemplarSet& ex, int crop);

// Random scale in [scale_min, scale_max], random crop position, bilinear
// resample to crop size. Normals are resampled componentwise then
// renormalized. If the sampled scale does not fit the source, the scale is
// redrawn (up to 8 tries) before giving up with DataError.
ParameterMaps random_scale_crop(const ParameterMaps& m, Rng& rng, const AugmentConfig& cfg);

// Hard per-pixel selection: a where mask is 1, b where 0. mask is row-major,
// one byte per pixel, same dimensions as a and b.
ParameterMaps compose_exemplars(const ParameterMaps& a, const ParameterMaps& b,
                                const std::vector<std::uint8_t>& mask);

struct TrainingSample {
    ImageBuffer input;    // tonemapped rendering, [0,1]
    ParameterMaps target;
};

// One collage training sample: with >= 2 exemplars, two distinct patches are
// scale/cropped and composed under a fresh Perlin mask; with a single
// exemplar only scale/crop is applied. The input is the target rendered
// under a light sampled from `dist` and tonemapped.
TrainingSample synth_training_sample(const ExemplarSet& ex, Rng& rng, const AugmentConfig& cfg,
                                     const LightDistribution& dist, const AmbientTerm& ambient);

} // namespace matxfer
