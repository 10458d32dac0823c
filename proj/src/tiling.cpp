#include "matxfer/tiling.hpp"

#include <cmath>

#include "matxfer/errors.hpp"

namespace matxfer {

namespace {

std::vector<int> axis_origins(int extent, int tile, int stride) {
    std::vector<int> origins;
    for (int o = 0; o + tile <= extent; o += stride) origins.push_back(o);
    if (origins.back() + tile < extent) origins.push_back(extent - tile);
    return origins;
}

// 10 accumulation channels: encoded normal, diffuse, roughness, specular.
constexpr int kAccChannels = 10;

void accumulate_tile(const ParameterMaps& t, int ox, int oy, const std::vector<float>& kernel,
                     int w, std::vector<double>& acc, std::vector<double>& wsum) {
    const int tile = t.width;
    for (int y = 0; y < tile; ++y) {
        for (int x = 0; x < tile; ++x) {
            const double kw = kernel[static_cast<std::size_t>(y) * tile + x];
            const std::size_t src = t.pixel(x, y);
            const std::size_t dst = static_cast<std::size_t>(oy + y) * w + (ox + x);
            double* a = &acc[dst * kAccChannels];
            float enc[3];
            encode_normal(&t.normal[3 * src], enc);
            for (int c = 0; c < 3; ++c) {
                a[c] += kw * enc[c];
                a[3 + c] += kw * t.diffuse[3 * src + c];
                a[7 + c] += kw * t.specular[3 * src + c];
            }
            a[6] += kw * t.roughness[src];
            wsum[dst] += kw;
        }
    }
}

ParameterMaps finalize_accumulators(const std::vector<double>& acc,
                                    const std::vector<double>& wsum, int w, int h) {
    ParameterMaps out(w, h);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        const double ws = wsum[p];
        if (ws <= 0.0) throw NumericError("stitch: uncovered pixel " + std::to_string(p));
        const double* a = &acc[p * kAccChannels];
        float enc[3];
        for (int c = 0; c < 3; ++c) {
            enc[c] = static_cast<float>(a[c] / ws);
            out.diffuse[3 * p + c] = static_cast<float>(a[3 + c] / ws);
            out.specular[3 * p + c] = static_cast<float>(a[7 + c] / ws);
        }
        decode_normal(enc, &out.normal[3 * p]);
        float r = static_cast<float>(a[6] / ws);
        out.roughness[p] = r < kAlphaMin ? kAlphaMin : (r > 1.0f ? 1.0f : r);
    }
    return out;
}

} // namespace

TilePlan plan_tiles(int w, int h, int tile, int stride) {
    if (tile < 2) throw ConfigError("tiler.tile: must be >= 2");
    if (stride < 1) throw ConfigError("tiler.stride: must be >= 1");
    if (stride > tile) throw ConfigError("tiler.stride: must be <= tile (coverage gap)");
    if (w < tile || h < tile)
        throw DataError("image " + std::to_string(w) + "x" + std::to_string(h) +
                        " smaller than tile " + std::to_string(tile));
    TilePlan plan;
    plan.tile = tile;
    plan.stride = stride;
    const std::vector<int> xs = axis_origins(w, tile, stride);
    const std::vector<int> ys = axis_origins(h, tile, stride);
    for (int y : ys)
        for (int x : xs) plan.origins.emplace_back(x, y);
    return plan;
}

std::vector<float> blend_weights(int tile) {
    if (tile < 2) throw ConfigError("blend_weights: tile must be >= 2");
    std::vector<float> kernel(static_cast<std::size_t>(tile) * tile);
    const double center = (tile - 1) / 2.0;
    const double sigma = tile / 4.0;
    // Nearest texel sits half a texel off the continuous center for even
    // tiles; shift the exponent so that texel gets weight exactly 1.
    const double dmin2 = tile % 2 == 0 ? 0.5 : 0.0;
    for (int y = 0; y < tile; ++y) {
        const double dy = y - center;
        for (int x = 0; x < tile; ++x) {
            const double dx = x - center;
            kernel[static_cast<std::size_t>(y) * tile + x] = static_cast<float>(
                std::exp(-(dx * dx + dy * dy - dmin2) / (2.0 * sigma * sigma)));
        }
    }
    return kernel;
}

ParameterMaps stitch(const std::vector<ParameterMaps>& tiles, const TilePlan& plan,
                     const std::vector<float>& kernel, int w, int h) {
    if (tiles.size() != plan.origins.size())
        throw DataError("stitch: " + std::to_string(tiles.size()) + " tiles for " +
                        std::to_string(plan.origins.size()) + " planned rects");
    std::vector<double> acc(static_cast<std::size_t>(w) * h * kAccChannels, 0.0);
    std::vector<double> wsum(static_cast<std::size_t>(w) * h, 0.0);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const ParameterMaps& t = tiles[i];
        if (t.width != plan.tile || t.height != plan.tile)
            throw DataError("stitch: tile " + std::to_string(i) + " is " +
                            std::to_string(t.width) + "x" + std::to_string(t.height) +
                            ", plan expects " + std::to_string(plan.tile));
        accumulate_tile(t, plan.origins[i].first, plan.origins[i].second, kernel, w, acc, wsum);
    }
    return finalize_accumulators(acc, wsum, w, h);
}

ParameterMaps infer_large(const ImageBuffer& img, TilePredictorBase& predictor, int tile,
                          int stride, InferStats* stats) {
    TilePlan plan = plan_tiles(img.width, img.height, tile, stride);
    std::vector<float> kernel = blend_weights(tile);
    std::vector<double> acc(static_cast<std::size_t>(img.width) * img.height * kAccChannels, 0.0);
    std::vector<double> wsum(static_cast<std::size_t>(img.width) * img.height, 0.0);

    if (stats) *stats = InferStats{};
    for (const auto& [ox, oy] : plan.origins) {
        ImageBuffer tile_img = crop(img, ox, oy, tile, tile);
        ParameterMaps maps = predictor.predict(tile_img);
        if (maps.width != tile || maps.height != tile)
            throw DataError("predictor returned " + std::to_string(maps.width) + "x" +
                            std::to_string(maps.height) + " maps for a " + std::to_string(tile) +
                            " tile");
        accumulate_tile(maps, ox, oy, kernel, img.width, acc, wsum);
        if (stats) {
            ++stats->tiles;
            const std::size_t maps_bytes =
                (maps.normal.size() + maps.diffuse.size() + maps.roughness.size() +
                 maps.specular.size()) * sizeof(float);
            const std::size_t live = predictor.live_bytes() + tile_img.byte_size() + maps_bytes;
            if (live > stats->peak_tile_bytes) stats->peak_tile_bytes = live;
        }
    }
    return finalize_accumulators(acc, wsum, img.width, img.height);
}

ParameterMaps substitute_normals(const ParameterMaps& finetuned, const ParameterMaps& pretrained,
                                 bool enable) {
    if (!enable) return finetuned;
    if (finetuned.width != pretrained.width || finetuned.height != pretrained.height)
        throw DataError("substitute_normals: dimensions differ: " +
                        std::to_string(finetuned.width) + "x" + std::to_string(finetuned.height) +
                        " vs " + std::to_string(pretrained.width) + "x" +
                        std::to_string(pretrained.height));
    ParameterMaps out = finetuned;
    out.normal = pretrained.normal;
    return out;
}

} // namespace matxfer
