#include "matxfer/perlin.hpp"

#include <cmath>
#include <stdexcept>

#include "matxfer/rng.hpp"

namespace matxfer {

namespace {

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Unit gradient at lattice point (i, j), keyed by the seed.
void lattice_gradient(std::uint64_t seed, int i, int j, double& gx, double& gy) {
    std::uint64_t h = splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(i) << 32) ^
                                                   static_cast<std::uint32_t>(j)));
    double angle = static_cast<double>(h >> 11) * 0x1.0p-53 * 6.283185307179586;
    gx = std::cos(angle);
    gy = std::sin(angle);
}

} // namespace

NoiseField perlin_field(std::uint64_t seed, int periods, int w, int h) {
    if (periods < 1) throw std::invalid_argument("perlin_field: periods must be >= 1");
    if (w < 2 || h < 2) throw std::invalid_argument("perlin_field: size must be >= 2");

    NoiseField f;
    f.width = w;
    f.height = h;
    f.periods = periods;
    f.values.resize(static_cast<std::size_t>(w) * h);

    // Gradient table for the (periods+1)^2 lattice corners.
    const int L = periods + 1;
    std::vector<double> gxs(static_cast<std::size_t>(L) * L), gys(gxs.size());
    for (int j = 0; j < L; ++j)
        for (int i = 0; i < L; ++i)
            lattice_gradient(seed, i, j, gxs[static_cast<std::size_t>(j) * L + i],
                             gys[static_cast<std::size_t>(j) * L + i]);

    const double sqrt2 = std::sqrt(2.0);
    for (int y = 0; y < h; ++y) {
        double v = static_cast<double>(y) * periods / h;
        int j = static_cast<int>(v);
        double fv = v - j;
        double wy = fade(fv);
        for (int x = 0; x < w; ++x) {
            double u = static_cast<double>(x) * periods / w;
            int i = static_cast<int>(u);
            double fu = u - i;
            double wx = fade(fu);

            const double* gx0 = &gxs[static_cast<std::size_t>(j) * L + i];
            const double* gy0 = &gys[static_cast<std::size_t>(j) * L + i];
            double n00 = gx0[0] * fu + gy0[0] * fv;
            double n10 = gx0[1] * (fu - 1.0) + gy0[1] * fv;
            double n01 = gx0[L] * fu + gy0[L] * (fv - 1.0);
            double n11 = gx0[L + 1] * (fu - 1.0) + gy0[L + 1] * (fv - 1.0);

            double nx0 = n00 + wx * (n10 - n00);
            double nx1 = n01 + wx * (n11 - n01);
            f.values[static_cast<std::size_t>(y) * w + x] =
                static_cast<float>(sqrt2 * (nx0 + wy * (nx1 - nx0)));
        }
    }
    return f;
}

std::vector<std::uint8_t> threshold_mask(const NoiseField& f, float tau) {
    std::vector<std::uint8_t> mask(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i)
        mask[i] = f.values[i] > tau ? 1 : 0;
    return mask;
}

} // namespace matxfer
