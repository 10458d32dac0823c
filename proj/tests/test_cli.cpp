#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "matxfer/config.hpp"
#include "matxfer/errors.hpp"
#include "matxfer/map_io.hpp"
#include "matxfer/procedural.hpp"

using namespace matxfer;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    fs::path dir = fs::temp_directory_path() / "matxfer_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    fs::path p = work_dir() / name;
    std::ofstream out(p);
    out << text;
    return p.string();
}

struct RunResult {
    int rc = -1;
    std::string output; // stdout and stderr combined
};

RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(MATXFER_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[512];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
    int status = pclose(pipe);
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string error_containing(std::function<void()> f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("defaults resolve sensibly") {
    RunConfig cfg = parse_config("", {});
    CHECK(cfg.seed == 1);
    CHECK(cfg.net.input_size == 64);
    CHECK(cfg.tile == 512);
    CHECK(cfg.stride == -1);
    CHECK(effective_stride(cfg) == 256);
    CHECK(effective_crop(cfg) == 64); // crop 0 falls back to net.input_size
    CHECK_FALSE(cfg.no_augment);
}

TEST_CASE("config file parsing") {
    std::string path = write_file("basic.cfg",
                                  "# full line comment\n"
                                  "\n"
                                  "run.seed = 9\n"
                                  "tiler.tile = 128\n"
                                  "tiler.stride = 64   # inline comment\n"
                                  "augment.scale_min = 0.7\n"
                                  "finetune.no_augment = true\n"
                                  "paths.output_dir = out/dir\n");
    RunConfig cfg = parse_config(path, {});
    CHECK(cfg.seed == 9);
    CHECK(cfg.tile == 128);
    CHECK(cfg.stride == 64);
    CHECK(cfg.augment.scale_min == doctest::Approx(0.7));
    CHECK(cfg.no_augment);
    CHECK(cfg.output_dir == "out/dir");
}

TEST_CASE("flags override the file and support both spellings") {
    std::string path = write_file("base.cfg", "tiler.tile = 128\nrun.seed = 5\n");
    RunConfig cfg = parse_config(path, {"--tiler.tile", "256", "--run.seed=77"});
    CHECK(cfg.tile == 256); // flag wins
    CHECK(cfg.seed == 77);

    RunConfig b = parse_config("", {"--no-augment", "--substitute-normals"});
    CHECK(b.no_augment);
    CHECK(b.substitute_normals);

    RunConfig c = parse_config("", {"--finetune.no_augment", "false"});
    CHECK_FALSE(c.no_augment);
}

TEST_CASE("parse errors name the offending location") {
    std::string bad_key = write_file("badkey.cfg", "run.seed = 1\nnet.depht = 3\n");
    std::string msg = error_containing([&] { parse_config(bad_key, {}); });
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("net.depht") != std::string::npos);

    std::string bad_val = write_file("badval.cfg", "tiler.tile = many\n");
    msg = error_containing([&] { parse_config(bad_val, {}); });
    CHECK(msg.find(":1") != std::string::npos);
    CHECK(msg.find("tiler.tile") != std::string::npos);
    CHECK(msg.find("many") != std::string::npos);

    std::string no_eq = write_file("noeq.cfg", "tiler.tile 128\n");
    msg = error_containing([&] { parse_config(no_eq, {}); });
    CHECK(msg.find("expected key = value") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"--net.deep", "3"}); });
    CHECK(msg.find("net.deep") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"--tiler.tile"}); });
    CHECK(msg.find("missing value") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"stray"}); });
    CHECK(msg.find("stray") != std::string::npos);

    CHECK_THROWS_AS(parse_config(work_dir().string() + "/nope.cfg", {}), ConfigError);
}

TEST_CASE("range validation") {
    std::string msg = error_containing([&] { parse_config("", {"--tiler.stride", "0"}); });
    CHECK(msg.find("tiler.stride") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"--tiler.tile=64", "--tiler.stride=80"}); });
    CHECK(msg.find("tiler.stride") != std::string::npos);
    CHECK(msg.find("<=") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"--net.input_size", "60"}); });
    CHECK(msg.find("net.input_size") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"--light.gray_prob", "1.5"}); });
    CHECK(msg.find("light.gray_prob") != std::string::npos);

    msg = error_containing([&] { parse_config("", {"--augment.crop", "40"}); });
    CHECK(msg.find("augment.crop") != std::string::npos);
}

TEST_CASE("config echo round-trips") {
    RunConfig cfg = parse_config("", {"--run.seed=123", "--augment.scale_max=1.75",
                                      "--paths.output_dir", "somewhere",
                                      "--light.ambient=0.125"});
    std::string text = render_config(cfg);
    std::string path = write_file("echo.cfg", text);
    RunConfig back = parse_config(path, {});
    CHECK(render_config(back) == text);
    CHECK(back.seed == 123);
    CHECK(back.augment.scale_max == doctest::Approx(1.75));
    CHECK(back.ambient.k_a == doctest::Approx(0.125));
    // every key appears in the echo
    for (const char* key : {"run.seed", "net.depth", "augment.crop", "loss.render_weight",
                            "light.ambient", "tiler.tile", "pretrain.lr", "finetune.lr",
                            "infer.substitute_normals", "render.elevation", "paths.output_dir"})
        CHECK(text.find(key) != std::string::npos);
}

TEST_CASE("train config mapping") {
    RunConfig cfg = parse_config("", {"--pretrain.iterations=7", "--finetune.iterations=9",
                                      "--no-augment", "--run.snapshot_every=3",
                                      "--augment.crop", "32"});
    TrainConfig pre = make_train_config(cfg, true);
    CHECK(pre.iterations == 7);
    CHECK(pre.augment.crop == 32);
    CHECK(pre.snapshot_every == 3);
    TrainConfig fin = make_train_config(cfg, false);
    CHECK(fin.iterations == 9);
    CHECK_FALSE(fin.augment_enabled);
}

TEST_CASE("cli exit codes and artifacts") {
    fs::path dir = work_dir();

    SUBCASE("no arguments prints usage and fails") {
        RunResult r = run_cli("");
        CHECK(r.rc == 2);
        CHECK(r.output.find("usage:") != std::string::npos);
    }

    SUBCASE("--help succeeds") {
        RunResult r = run_cli("--help");
        CHECK(r.rc == 0);
        CHECK(r.output.find("metrics") != std::string::npos);
    }

    SUBCASE("unknown command is a config error") {
        RunResult r = run_cli("frobnicate");
        CHECK(r.rc == 2);
        CHECK(r.output.find("frobnicate") != std::string::npos);
    }

    SUBCASE("bad flag value is a config error") {
        RunResult r = run_cli("metrics --tiler.tile=shiny");
        CHECK(r.rc == 2);
        CHECK(r.output.find("error: config:") != std::string::npos);
    }

    SUBCASE("metrics on identical map sets reports zeros") {
        ParameterMaps m = procedural_material(31, 48);
        std::string stem = (dir / "mat").string();
        write_maps(m, MapPaths::from_stem(stem));
        std::string out_dir = (dir / "metrics_out").string();
        RunResult r = run_cli("metrics --paths.prediction " + stem + " --paths.reference " +
                              stem + " --paths.output_dir " + out_dir);
        REQUIRE(r.rc == 0);
        std::size_t nl = r.output.find('\n');
        REQUIRE(nl != std::string::npos);
        CHECK(r.output.substr(0, nl) ==
              "rmse_normal,rmse_diffuse,rmse_roughness,rmse_specular,rmse_render");
        std::istringstream row(r.output.substr(nl + 1));
        std::string field;
        int fields = 0;
        while (std::getline(row, field, ',')) {
            CHECK(std::stod(field) == doctest::Approx(0.0).epsilon(1e-12));
            ++fields;
        }
        CHECK(fields == 5);
        CHECK(fs::exists(fs::path(out_dir) / "metrics.csv"));
        CHECK(fs::exists(fs::path(out_dir) / "config_echo.txt"));
    }

    SUBCASE("metrics without stems is a config error") {
        RunResult r = run_cli("metrics --paths.output_dir " + (dir / "m2").string());
        CHECK(r.rc == 2);
        CHECK(r.output.find("paths.prediction") != std::string::npos);
    }

    SUBCASE("missing map files are a data error") {
        RunResult r = run_cli("metrics --paths.prediction " + (dir / "absent").string() +
                              " --paths.reference " + (dir / "absent").string() +
                              " --paths.output_dir " + (dir / "m3").string());
        CHECK(r.rc == 3);
        CHECK(r.output.find("error: data:") != std::string::npos);
    }

    SUBCASE("render writes a png") {
        ParameterMaps m = procedural_material(7, 32);
        std::string stem = (dir / "rmat").string();
        write_maps(m, MapPaths::from_stem(stem));
        std::string out_dir = (dir / "render_out").string();
        RunResult r = run_cli("render --paths.prediction " + stem + " --paths.output_dir " +
                              out_dir);
        REQUIRE(r.rc == 0);
        ImageBuffer img = read_png((fs::path(out_dir) / "render.png").string());
        CHECK(img.width == 32);
        CHECK(img.channels == 3);
    }
}
