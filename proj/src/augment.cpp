#include "matxfer/augment.hpp"

#include <cmath>

#include "matxfer/errors.hpp"
#include "matxfer/perlin.hpp"

namespace matxfer {

namespace {

struct BilinearTap {
    int i0, i1;
    double w1; // weight of the i1 sample
};

BilinearTap tap(double coord, int limit) {
    BilinearTap t;
    double f = std::floor(coord);
    t.i0 = static_cast<int>(f);
    t.w1 = coord - f;
    t.i1 = t.i0 + 1;
    if (t.i0 < 0) { t.i0 = 0; t.i1 = 0; t.w1 = 0.0; }
    if (t.i1 > limit - 1) { t.i1 = limit - 1; if (t.i0 > limit - 1) t.i0 = limit - 1; }
    return t;
}

void bilinear(const std::vector<float>& src, int w, int ch, const BilinearTap& tx,
              const BilinearTap& ty, double* out) {
    const float* r0 = &src[(static_cast<std::size_t>(ty.i0) * w + tx.i0) * ch];
    const float* r1 = &src[(static_cast<std::size_t>(ty.i0) * w + tx.i1) * ch];
    const float* r2 = &src[(static_cast<std::size_t>(ty.i1) * w + tx.i0) * ch];
    const float* r3 = &src[(static_cast<std::size_t>(ty.i1) * w + tx.i1) * ch];
    for (int c = 0; c < ch; ++c) {
        double top = r0[c] + tx.w1 * (r1[c] - r0[c]);
        double bot = r2[c] + tx.w1 * (r3[c] - r2[c]);
        out[c] = top + ty.w1 * (bot - top);
    }
}

} // namespace

void validate_exemplar_set(const ExemplarSet& ex, int crop) {
    if (ex.patches.empty()) throw DataError("exemplar set is empty");
    for (std::size_t i = 0; i < ex.patches.size(); ++i) {
        const ParameterMaps& p = ex.patches[i];
        if (p.width < crop || p.height < crop)
            throw DataError("exemplar " + std::to_string(i) + " is " + std::to_string(p.width) +
                            "x" + std::to_string(p.height) + ", smaller than crop " +
                            std::to_string(crop));
        if (!validate_maps(p).ok())
            throw DataError("exemplar " + std::to_string(i) + " fails map validation");
    }
}

ParameterMaps random_scale_crop(const ParameterMaps& m, Rng& rng, const AugmentConfig& cfg) {
    const int crop = cfg.crop;
    int src = -1;
    for (int attempt = 0; attempt < 8; ++attempt) {
        double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
        int candidate = static_cast<int>(std::lround(crop * scale));
        if (candidate < 1) candidate = 1;
        if (candidate <= m.width && candidate <= m.height) {
            src = candidate;
            break;
        }
    }
    if (src < 0)
        throw DataError("source " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                        " too small for crop " + std::to_string(crop) +
                        " at sampled scales (8 tries)");

    const int x0 = rng.uniform_int(m.width - src + 1);
    const int y0 = rng.uniform_int(m.height - src + 1);
    const double step = static_cast<double>(src) / crop;

    ParameterMaps out(crop, crop);
    for (int y = 0; y < crop; ++y) {
        BilinearTap ty = tap(y0 + (y + 0.5) * step - 0.5, m.height);
        for (int x = 0; x < crop; ++x) {
            BilinearTap tx = tap(x0 + (x + 0.5) * step - 0.5, m.width);
            double n[3], d[3], r[1], s[3];
            bilinear(m.normal, m.width, 3, tx, ty, n);
            bilinear(m.diffuse, m.width, 3, tx, ty, d);
            bilinear(m.roughness, m.width, 1, tx, ty, r);
            bilinear(m.specular, m.width, 3, tx, ty, s);

            double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            // Interpolated upper-hemisphere normals keep z > 0, so only the
            // length needs fixing.
            float* np = out.normal_at(x, y);
            for (int c = 0; c < 3; ++c) np[c] = static_cast<float>(n[c] / len);
            float* dp = out.diffuse_at(x, y);
            for (int c = 0; c < 3; ++c) dp[c] = static_cast<float>(d[c]);
            out.roughness_at(x, y) = static_cast<float>(r[0]);
            float* sp = out.specular_at(x, y);
            for (int c = 0; c < 3; ++c) sp[c] = static_cast<float>(s[c]);
        }
    }
    return out;
}

ParameterMaps compose_exemplars(const ParameterMaps& a, const ParameterMaps& b,
                                const std::vector<std::uint8_t>& mask) {
    if (a.width != b.width || a.height != b.height)
        throw DataError("compose_exemplars: dimensions differ: " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height));
    if (mask.size() != a.pixel_count())
        throw DataError("compose_exemplars: mask has " + std::to_string(mask.size()) +
                        " entries for " + std::to_string(a.pixel_count()) + " pixels");

    ParameterMaps out(a.width, a.height);
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        const ParameterMaps& src = mask[p] ? a : b;
        for (int c = 0; c < 3; ++c) {
            out.normal[3 * p + c] = src.normal[3 * p + c];
            out.diffuse[3 * p + c] = src.diffuse[3 * p + c];
            out.specular[3 * p + c] = src.specular[3 * p + c];
        }
        out.roughness[p] = src.roughness[p];
    }
    return out;
}

TrainingSample synth_training_sample(const ExemplarSet& ex, Rng& rng, const AugmentConfig& cfg,
                                     const LightDistribution& dist, const AmbientTerm& ambient) {
    if (ex.patches.empty()) throw DataError("exemplar set is empty");

    TrainingSample sample;
    if (ex.patches.size() >= 2) {
        const int n = static_cast<int>(ex.patches.size());
        int i = rng.uniform_int(n);
        int j = rng.uniform_int(n - 1);
        if (j >= i) ++j; // without replacement
        ParameterMaps a = random_scale_crop(ex.patches[static_cast<std::size_t>(i)], rng, cfg);
        ParameterMaps b = random_scale_crop(ex.patches[static_cast<std::size_t>(j)], rng, cfg);
        int periods = cfg.periods_min + rng.uniform_int(cfg.periods_max - cfg.periods_min + 1);
        float tau = static_cast<float>(rng.uniform(cfg.tau_min, cfg.tau_max));
        NoiseField field = perlin_field(rng.next_u64(), periods, cfg.crop, cfg.crop);
        sample.target = compose_exemplars(a, b, threshold_mask(field, tau));
    } else {
        sample.target = random_scale_crop(ex.patches[0], rng, cfg);
    }

    DirectionalLight light = sample_light(rng, dist);
    sample.input = tonemap(render_image(sample.target, light, ViewSpec{}, ambient));
    return sample;
}

} // namespace matxfer
