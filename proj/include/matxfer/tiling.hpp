#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "matxfer/image.hpp"
#include "matxfer/maps.hpp"

namespace matxfer {

struct TilePlan {
    int tile = 0;
    int stride = 0;
    std::vector<std::pair<int, int>> origins; // (x, y), stride grid + clamped last row/column
};

// Origins at multiples of stride; when the last regular origin undershoots,
// one extra origin clamped to W-tile (resp. H-tile) is appended; duplicates
// removed. Coverage of every pixel is guaranteed. Throws ConfigError for bad
// tile/stride, DataError when the image is smaller than the tile.
TilePlan plan_tiles(int w, int h, int tile, int stride);

// tile x tile Gaussian, sigma = tile/4, distances measured from the tile
// center. Weights are normalized so the texel nearest the center gets
// exactly 1 (for even tiles the continuous center falls between texels).
std::vector<float> blend_weights(int tile);

// Per pixel: sum(w_i * tile_i) / sum(w_i) over covering tiles, on
// RGB-encoded normals, decoded and renormalized at the end. `tiles` is
// parallel to plan.origins.
ParameterMaps stitch(const std::vector<ParameterMaps>& tiles, const TilePlan& plan,
                     const std::vector<float>& kernel, int w, int h);

// Anything that maps a tile image to tile maps. live_bytes reports the
// transient allocation owned by the predictor, for the constant-memory
// instrumentation.
class TilePredictorBase {
public:
    virtual ~TilePredictorBase() = default;
    virtual ParameterMaps predict(const ImageBuffer& tile) = 0;
    virtual std::size_t live_bytes() const = 0;
};

struct InferStats {
    int tiles = 0;
    // Max over tiles of predictor live bytes plus the tile input/output
    // buffers. Excludes the two full-size accumulators by design.
    std::size_t peak_tile_bytes = 0;
};

// Streams the plan's tiles through the predictor and blends them into
// full-size accumulators. Output has the input's dimensions.
ParameterMaps infer_large(const ImageBuffer& img, TilePredictorBase& predictor, int tile,
                          int stride, InferStats* stats = nullptr);

// When enabled, the fine-tuned maps with the pre-trained normal map swapped
// in; otherwise the fine-tuned maps unchanged.
ParameterMaps substitute_normals(const ParameterMaps& finetuned, const ParameterMaps& pretrained,
                                 bool enable);

} // namespace matxfer
