#pragma once

#include <cstdint>

#include "matxfer/maps.hpp"

namespace matxfer {

// Random synthetic material from one of four families: uniform, two-tone
// regions split by Perlin noise, tiled grid with grout, metallic flakes.
// Deterministic given the seed; always passes validate_maps. size >= 16.
ParameterMaps procedural_material(std::uint64_t seed, int size);

// Same, with the family forced (0..3 in the order above). Used by tests.
ParameterMaps procedural_material_family(std::uint64_t seed, int size, int family);

} // namespace matxfer
