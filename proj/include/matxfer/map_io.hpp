#pragma once

#include <string>

#include "matxfer/image.hpp"
#include "matxfer/maps.hpp"

namespace matxfer {

// On-disk convention: four PNGs per material, `<stem>_normal.png`,
// `<stem>_diffuse.png`, `<stem>_roughness.png`, `<stem>_specular.png`.
// Albedo maps are stored sRGB and held linear in memory; normal and
// roughness maps are stored linearly.
struct MapPaths {
    std::string normal;
    std::string diffuse;
    std::string roughness;
    std::string specular;
    static MapPaths from_stem(const std::string& stem);
};

float srgb_to_linear(float v);
float linear_to_srgb(float v);

// Raw PNG access: values scaled to [0,1], no transfer function applied.
// 8- and 16-bit files only; alpha is dropped.
ImageBuffer read_png(const std::string& path);
void write_png(const std::string& path, const ImageBuffer& img, int bit_depth = 8);

// Four-file material I/O. Roughness may be supplied as 3-channel gray
// (channel 0 is used). Throws DataError on resolution mismatch or
// unsupported bit depth.
ParameterMaps read_maps(const MapPaths& paths);
void write_maps(const ParameterMaps& m, const MapPaths& paths, int bit_depth = 16);

} // namespace matxfer
