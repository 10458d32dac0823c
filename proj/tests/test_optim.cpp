#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "matxfer/adam.hpp"
#include "matxfer/checkpoint.hpp"
#include "matxfer/errors.hpp"
#include "matxfer/graph.hpp"
#include "matxfer/rng.hpp"

using namespace matxfer;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / "matxfer_optim_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("zero gradient leaves parameters unchanged but advances t") {
    Graph g;
    Tensor t({3});
    t.data = {1.f, -2.f, 3.f};
    int x = g.param(t, "x");
    int loss = g.mean_reduce(g.scalar_mul(x, 0.f));
    g.forward();
    g.backward(loss);

    Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8});
    adam.step(g);
    CHECK(adam.t() == 1);
    CHECK(g.value(x).data[0] == 1.f);
    CHECK(g.value(x).data[1] == -2.f);
    CHECK(g.value(x).data[2] == 3.f);
}

TEST_CASE("first step magnitude is lr * sign(gradient)") {
    // bias corrections cancel |g| at t=1: update = lr * g/|g| up to eps
    Graph g;
    Tensor t({2});
    t.data = {0.5f, 0.5f};
    int x = g.param(t, "x");
    int loss = g.mean_reduce(x);
    g.forward();
    g.backward(loss);
    g.grad_mutable(x).data = {0.3f, -0.007f};

    const double lr = 0.01;
    Adam adam(AdamConfig{lr, 0.9, 0.999, 1e-8});
    adam.step(g);
    CHECK(g.value(x).data[0] == doctest::Approx(0.5 - lr).epsilon(1e-5));
    CHECK(g.value(x).data[1] == doctest::Approx(0.5 + lr).epsilon(1e-4));
}

TEST_CASE("constant gradient moves the parameter monotonically against it") {
    Graph g;
    Tensor t({1});
    t.data = {2.f};
    int x = g.param(t, "x");
    int loss = g.mean_reduce(x);
    Adam adam(AdamConfig{0.05, 0.9, 0.999, 1e-8});
    float prev = 2.f;
    for (int i = 0; i < 100; ++i) {
        g.forward();
        g.backward(loss); // d mean(x)/dx = 1, constant positive
        adam.step(g);
        float cur = g.value(x).data[0];
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(adam.t() == 100);
}

TEST_CASE("adam drives a quadratic to its minimum") {
    Graph g;
    Rng rng(5);
    Tensor x0({8});
    for (float& v : x0.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    int x = g.param(x0, "x");
    int loss = g.mean_reduce(g.mul(x, x)); // minimum at 0
    double initial = g.forward_scalar(loss);
    Adam adam(AdamConfig{0.05, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 400; ++i) {
        g.forward();
        g.backward(loss);
        adam.step(g);
    }
    double final = g.forward_scalar(loss);
    CHECK(final < 0.01 * initial);
}

TEST_CASE("non-finite gradient aborts the whole step and names the parameter") {
    Graph g;
    Tensor a({2}), b({2});
    a.data = {1.f, 1.f};
    b.data = {2.f, 2.f};
    int pa = g.param(a, "alpha");
    int pb = g.param(b, "beta");
    int loss = g.mean_reduce(g.add(pa, pb));
    g.forward();
    g.backward(loss);
    g.grad_mutable(pb).data[1] = std::numeric_limits<float>::quiet_NaN();

    Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8});
    bool threw = false;
    try {
        adam.step(g);
    } catch (const NumericError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
    CHECK(threw);
    CHECK(adam.t() == 0);
    // neither parameter moved, including the healthy one
    CHECK(g.value(pa).data[0] == 1.f);
    CHECK(g.value(pb).data[0] == 2.f);
}

TEST_CASE("checkpoint round trip is bit identical") {
    fs::path dir = temp_dir("roundtrip");
    Checkpoint ck;
    ck.catalog_version = kOpCatalogVersion;
    ck.config_words = {64, 4, 8, 16, 9};
    Rng rng(3);
    Tensor t1({2, 3});
    for (float& v : t1.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor t2({4});
    for (float& v : t2.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    ck.tensors.emplace_back("layer.w", t1);
    ck.tensors.emplace_back("layer.b", t2);

    std::string path = (dir / "ck.mxn").string();
    save_checkpoint(ck, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.catalog_version == ck.catalog_version);
    CHECK(back.config_words == ck.config_words);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors[0].first == "layer.w");
    CHECK(back.tensors[0].second.shape == t1.shape);
    for (std::size_t i = 0; i < t1.data.size(); ++i)
        CHECK(back.tensors[0].second.data[i] == t1.data[i]); // bit-exact

    // byte determinism of the writer
    std::string path2 = (dir / "ck2.mxn").string();
    save_checkpoint(ck, path2);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("checkpoint corruption is detected") {
    fs::path dir = temp_dir("corrupt");
    Checkpoint ck;
    ck.catalog_version = kOpCatalogVersion;
    ck.config_words = {7};
    Tensor t({5});
    t.data = {1, 2, 3, 4, 5};
    ck.tensors.emplace_back("t", t);
    std::string path = (dir / "ck.mxn").string();
    save_checkpoint(ck, path);
    std::vector<char> bytes = read_file(path);

    auto write_variant = [&](const std::vector<char>& b, const char* name) {
        std::string p = (dir / name).string();
        std::ofstream out(p, std::ios::binary);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
        return p;
    };

    SUBCASE("truncated file") {
        std::vector<char> cut(bytes.begin(), bytes.end() - 7);
        CHECK_THROWS_AS(load_checkpoint(write_variant(cut, "cut.mxn")), DataError);
    }
    SUBCASE("bad magic") {
        std::vector<char> bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(load_checkpoint(write_variant(bad, "magic.mxn")), DataError);
    }
    SUBCASE("flipped payload byte fails the checksum") {
        std::vector<char> bad = bytes;
        bad[bytes.size() / 2] ^= 0x40;
        CHECK_THROWS_AS(load_checkpoint(write_variant(bad, "flip.mxn")), DataError);
    }
    SUBCASE("trailing garbage") {
        std::vector<char> bad = bytes;
        bad.push_back(0);
        CHECK_THROWS_AS(load_checkpoint(write_variant(bad, "trail.mxn")), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint((dir / "nope.mxn").string()), DataError);
    }
}

TEST_CASE("catalog version mismatch is rejected") {
    fs::path dir = temp_dir("version");
    Checkpoint ck;
    ck.catalog_version = kOpCatalogVersion + 1;
    Tensor t({1});
    t.data = {1.f};
    ck.tensors.emplace_back("t", t);
    std::string path = (dir / "future.mxn").string();
    save_checkpoint(ck, path);
    bool threw = false;
    try {
        load_checkpoint(path);
    } catch (const DataError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    CHECK(threw);
}
