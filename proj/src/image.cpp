#include "matxfer/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace matxfer {

ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
        throw std::out_of_range("crop: rectangle outside image");
    ImageBuffer out(w, h, img.channels);
    for (int y = 0; y < h; ++y) {
        const float* src = &img.data[img.index(x0, y0 + y, 0)];
        float* dst = &out.data[out.index(0, y, 0)];
        std::copy(src, src + static_cast<std::size_t>(w) * img.channels, dst);
    }
    return out;
}

ImageBuffer tonemap(const ImageBuffer& img, float gamma) {
    ImageBuffer out(img.width, img.height, img.channels);
    const float inv_gamma = 1.0f / gamma;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float v = std::clamp(img.data[i], 0.0f, 1.0f);
        out.data[i] = std::pow(v, inv_gamma);
    }
    return out;
}

bool all_finite_nonnegative(const ImageBuffer& img) {
    for (float v : img.data)
        if (!std::isfinite(v) || v < 0.0f) return false;
    return true;
}

} // namespace matxfer
