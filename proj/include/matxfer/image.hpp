#pragma once

#include <cstddef>
#include <vector>

namespace matxfer {

// Row-major interleaved raster of linear radiance (or display values after
// tonemapping). Channel count is arbitrary; the renderer produces 3 channels.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, int c, float fill = 0.f)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }

    float& at(int x, int y, int c) { return data[index(x, y, c)]; }
    float at(int x, int y, int c) const { return data[index(x, y, c)]; }

    std::size_t byte_size() const { return data.size() * sizeof(float); }
};

ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int w, int h);

// clamp(img, 0, 1)^(1/gamma) per channel.
ImageBuffer tonemap(const ImageBuffer& img, float gamma = 2.2f);

bool all_finite_nonnegative(const ImageBuffer& img);

} // namespace matxfer
