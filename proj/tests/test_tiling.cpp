#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "matxfer/errors.hpp"
#include "matxfer/procedural.hpp"
#include "matxfer/rng.hpp"
#include "matxfer/tiling.hpp"

using namespace matxfer;

namespace {

// Deterministic stand-in predictor: fills every map channel from the tile's
// mean input so distinct tiles give distinct outputs.
class StubPredictor : public TilePredictorBase {
public:
    explicit StubPredictor(int tile) : tile_(tile) {}

    ParameterMaps predict(const ImageBuffer& t) override {
        REQUIRE(t.width == tile_);
        REQUIRE(t.height == tile_);
        double mean = 0.0;
        for (float v : t.data) mean += v;
        mean /= double(t.data.size());
        float u = float(0.2 + 0.6 * (mean - std::floor(mean)));
        float nx = 0.3f * (u - 0.5f);
        float nz = std::sqrt(1.f - nx * nx);
        ParameterMaps m = constant_maps(tile_, tile_, {nx, 0, nz}, {u, u * 0.5f, 0.2f},
                                        0.1f + 0.8f * u, {0.04f, 0.04f, 0.04f});
        scratch_.assign(std::size_t(tile_) * tile_, 0.f);
        return m;
    }

    std::size_t live_bytes() const override { return scratch_.size() * sizeof(float); }

private:
    int tile_;
    std::vector<float> scratch_;
};

ImageBuffer ramp_image(int w, int h, std::uint64_t seed) {
    ImageBuffer img(w, h, 3);
    Rng rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = float((x + y * 0.37 + c * 11.1) / (w + h)) +
                                  0.01f * float(rng.uniform(0.0, 1.0));
    return img;
}

} // namespace

TEST_CASE("tile plan for 2048x1024 at 512/256 has 21 tiles") {
    TilePlan plan = plan_tiles(2048, 1024, 512, 256);
    CHECK(plan.origins.size() == 21);
    std::set<int> xs, ys;
    for (auto [x, y] : plan.origins) {
        xs.insert(x);
        ys.insert(y);
        CHECK(x + 512 <= 2048);
        CHECK(y + 512 <= 1024);
    }
    CHECK(xs.size() == 7);
    CHECK(ys.size() == 3);
    CHECK(*xs.rbegin() == 2048 - 512);
    CHECK(*ys.rbegin() == 1024 - 512);
}

TEST_CASE("clamped trailing origin for a 900-wide image") {
    TilePlan plan = plan_tiles(900, 512, 512, 256);
    std::set<int> xs;
    for (auto [x, y] : plan.origins) {
        xs.insert(x);
        CHECK(y == 0);
    }
    CHECK(xs == std::set<int>{0, 256, 388});
}

TEST_CASE("image equal to the tile gives a single origin") {
    TilePlan plan = plan_tiles(512, 512, 512, 256);
    REQUIRE(plan.origins.size() == 1);
    CHECK(plan.origins[0] == std::pair<int, int>{0, 0});
}

TEST_CASE("every pixel is covered by at least one tile") {
    for (auto [w, h, tile, stride] : {std::tuple{97, 65, 32, 17}, {64, 64, 32, 32},
                                      {130, 40, 33, 9}}) {
        TilePlan plan = plan_tiles(w, h, tile, stride);
        std::vector<int> cover(std::size_t(w) * h, 0);
        for (auto [x0, y0] : plan.origins)
            for (int y = y0; y < y0 + tile; ++y)
                for (int x = x0; x < x0 + tile; ++x) ++cover[std::size_t(y) * w + x];
        CHECK(*std::min_element(cover.begin(), cover.end()) >= 1);
    }
}

TEST_CASE("plan parameter validation") {
    CHECK_THROWS_AS(plan_tiles(64, 64, 1, 1), ConfigError);
    CHECK_THROWS_AS(plan_tiles(64, 64, 32, 0), ConfigError);
    bool threw = false;
    try {
        plan_tiles(64, 64, 32, 48);
    } catch (const ConfigError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("coverage gap") != std::string::npos);
    }
    CHECK(threw);
    CHECK_THROWS_AS(plan_tiles(100, 31, 32, 16), DataError); // image smaller than tile
}

TEST_CASE("blend kernel shape") {
    SUBCASE("center weight is exactly 1") {
        for (int tile : {64, 65, 512}) {
            std::vector<float> k = blend_weights(tile);
            REQUIRE(k.size() == std::size_t(tile) * tile);
            CHECK(*std::max_element(k.begin(), k.end()) == 1.0f);
        }
    }
    SUBCASE("corner weight of a 512 tile") {
        std::vector<float> k = blend_weights(512);
        // distance^2 from center (255.5, 255.5) to texel (0, 0) is 2 * 255.5^2;
        // the peak normalization shifts it by the minimal 0.5, so the corner
        // is exp(-(130560.5 - 0.5) / (2 * 128^2)) = exp(-3.984375)
        CHECK(double(k[0]) == doctest::Approx(std::exp(-3.984375)).epsilon(1e-6));
        CHECK(std::abs(double(k[0]) - 0.0186) < 1e-4);
    }
    SUBCASE("monotone decay along rays from the center") {
        const int tile = 64;
        std::vector<float> k = blend_weights(tile);
        auto at = [&](int x, int y) { return k[std::size_t(y) * tile + x]; };
        for (int i = tile / 2; i + 1 < tile; ++i) {
            CHECK(at(i + 1, tile / 2) <= at(i, tile / 2));
            CHECK(at(tile / 2, i + 1) <= at(tile / 2, i));
            CHECK(at(i + 1, i + 1) <= at(i, i));
        }
        // symmetric under x/y mirror
        for (int y = 0; y < tile; ++y)
            for (int x = 0; x < tile; ++x) {
                CHECK(at(x, y) == doctest::Approx(at(tile - 1 - x, y)).epsilon(1e-12));
                CHECK(at(x, y) == doctest::Approx(at(x, tile - 1 - y)).epsilon(1e-12));
            }
    }
}

TEST_CASE("stitching constant tiles reproduces the constant") {
    const int tile = 32, stride = 16, w = 80, h = 48;
    TilePlan plan = plan_tiles(w, h, tile, stride);
    ParameterMaps c = constant_maps(tile, tile, {0.28f, -0.1f, 0.954778f}, {0.6f, 0.3f, 0.2f},
                                    0.37f, {0.05f, 0.06f, 0.07f});
    std::vector<ParameterMaps> tiles(plan.origins.size(), c);
    ParameterMaps out = stitch(tiles, plan, blend_weights(tile), w, h);
    REQUIRE(out.width == w);
    REQUIRE(out.height == h);
    float worst = 0.f;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            worst = std::max(worst, std::abs(out.diffuse_at(x, y)[0] - 0.6f));
            worst = std::max(worst, std::abs(out.roughness_at(x, y) - 0.37f));
            worst = std::max(worst, std::abs(out.specular_at(x, y)[2] - 0.07f));
            worst = std::max(worst, std::abs(out.normal_at(x, y)[0] - c.normal_at(0, 0)[0]));
        }
    CHECK(worst < 1e-5f);
}

TEST_CASE("stitch matches a brute-force weighted average") {
    const int tile = 32, stride = 16, w = 96, h = 64;
    TilePlan plan = plan_tiles(w, h, tile, stride);
    std::vector<float> kernel = blend_weights(tile);

    Rng rng(77);
    std::vector<ParameterMaps> tiles;
    for (std::size_t i = 0; i < plan.origins.size(); ++i)
        tiles.push_back(procedural_material(rng.next_u64(), tile));

    ParameterMaps out = stitch(tiles, plan, kernel, w, h);

    // independent accumulation, channel by channel
    auto check_channel = [&](auto get_tile, auto get_out, double tol) {
        double worst = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < plan.origins.size(); ++i) {
                    auto [x0, y0] = plan.origins[i];
                    int lx = x - x0, ly = y - y0;
                    if (lx < 0 || ly < 0 || lx >= tile || ly >= tile) continue;
                    double wgt = kernel[std::size_t(ly) * tile + lx];
                    num += wgt * get_tile(tiles[i], lx, ly);
                    den += wgt;
                }
                worst = std::max(worst, std::abs(num / den - get_out(x, y)));
            }
        CHECK(worst < tol);
    };
    check_channel([](const ParameterMaps& m, int x, int y) { return double(m.diffuse_at(x, y)[1]); },
                  [&](int x, int y) { return double(out.diffuse_at(x, y)[1]); }, 1e-6);
    check_channel([](const ParameterMaps& m, int x, int y) { return double(m.roughness_at(x, y)); },
                  [&](int x, int y) { return double(out.roughness_at(x, y)); }, 1e-6);
    check_channel([](const ParameterMaps& m, int x, int y) { return double(m.specular_at(x, y)[0]); },
                  [&](int x, int y) { return double(out.specular_at(x, y)[0]); }, 1e-6);

    // normals: blend in encoded space, then decode and renormalize
    double worst_dot = 1.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double enc[3] = {0, 0, 0};
            double den = 0.0;
            for (std::size_t i = 0; i < plan.origins.size(); ++i) {
                auto [x0, y0] = plan.origins[i];
                int lx = x - x0, ly = y - y0;
                if (lx < 0 || ly < 0 || lx >= tile || ly >= tile) continue;
                double wgt = kernel[std::size_t(ly) * tile + lx];
                float rgb[3];
                encode_normal(tiles[i].normal_at(lx, ly), rgb);
                for (int c = 0; c < 3; ++c) enc[c] += wgt * rgb[c];
                den += wgt;
            }
            float avg[3] = {float(enc[0] / den), float(enc[1] / den), float(enc[2] / den)};
            float n[3];
            decode_normal(avg, n);
            const float* got = out.normal_at(x, y);
            worst_dot = std::min(worst_dot,
                                 double(n[0]) * got[0] + double(n[1]) * got[1] +
                                     double(n[2]) * got[2]);
        }
    // float-stored components round at ~1e-7, so the dot can dip that far
    CHECK(worst_dot > 1.0 - 1e-6);
}

TEST_CASE("infer_large equals plan + predict + stitch done by hand") {
    const int tile = 32, stride = 16, w = 80, h = 64;
    ImageBuffer img = ramp_image(w, h, 5);

    StubPredictor byhand(tile);
    TilePlan plan = plan_tiles(w, h, tile, stride);
    std::vector<ParameterMaps> tiles;
    for (auto [x0, y0] : plan.origins) tiles.push_back(byhand.predict(crop(img, x0, y0, tile, tile)));
    ParameterMaps expect = stitch(tiles, plan, blend_weights(tile), w, h);

    StubPredictor stream(tile);
    InferStats stats;
    ParameterMaps got = infer_large(img, stream, tile, stride, &stats);

    CHECK(stats.tiles == int(plan.origins.size()));
    CHECK(got.diffuse == expect.diffuse);
    CHECK(got.normal == expect.normal);
    CHECK(got.roughness == expect.roughness);
    CHECK(got.specular == expect.specular);
}

TEST_CASE("per-tile memory does not grow with the image") {
    const int tile = 32, stride = 16;
    StubPredictor p(tile);
    InferStats small_stats, large_stats;
    infer_large(ramp_image(64, 64, 1), p, tile, stride, &small_stats);
    infer_large(ramp_image(256, 128, 2), p, tile, stride, &large_stats);
    CHECK(small_stats.tiles < large_stats.tiles);
    CHECK(small_stats.peak_tile_bytes == large_stats.peak_tile_bytes);
    CHECK(large_stats.peak_tile_bytes > 0);
}

TEST_CASE("normal substitution swaps only the normal map") {
    ParameterMaps fine = procedural_material(10, 32);
    ParameterMaps pre = procedural_material(11, 32);

    ParameterMaps off = substitute_normals(fine, pre, false);
    CHECK(off.normal == fine.normal);
    CHECK(off.diffuse == fine.diffuse);

    ParameterMaps on = substitute_normals(fine, pre, true);
    CHECK(on.normal == pre.normal);
    CHECK(on.diffuse == fine.diffuse);
    CHECK(on.roughness == fine.roughness);
    CHECK(on.specular == fine.specular);
}
