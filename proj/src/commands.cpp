#include "matxfer/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "matxfer/errors.hpp"
#include "matxfer/map_io.hpp"
#include "matxfer/tiling.hpp"

namespace fs = std::filesystem;

namespace matxfer {

namespace {

std::string join(const std::string& dir, const std::string& name) {
    if (fs::path(name).is_absolute()) return name;
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

void prepare_output_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw DataError("cannot create output directory " + cfg.output_dir);
    write_text(join(cfg.output_dir, "config_echo.txt"), render_config(cfg));
}

ExemplarSet load_exemplars(const RunConfig& cfg) {
    if (cfg.exemplar_dir.empty())
        throw ConfigError("paths.exemplars: required for this command");
    if (!fs::is_directory(cfg.exemplar_dir))
        throw DataError(cfg.exemplar_dir + ": not a directory");
    const std::string suffix = "_normal.png";
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(cfg.exemplar_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            stems.push_back((entry.path().parent_path() /
                             name.substr(0, name.size() - suffix.size())).string());
    }
    std::sort(stems.begin(), stems.end());
    if (stems.empty())
        throw DataError(cfg.exemplar_dir + ": no exemplar map sets (*_normal.png) found");
    ExemplarSet ex;
    for (const std::string& stem : stems) ex.patches.push_back(read_maps(MapPaths::from_stem(stem)));
    validate_exemplar_set(ex, effective_crop(cfg));
    return ex;
}

NetworkParams load_checkpoint_path(const std::string& path, const char* key) {
    if (path.empty())
        throw ConfigError(std::string(key) + ": required for this command");
    return load_network(path);
}

class NetTilePredictor : public TilePredictorBase {
public:
    NetTilePredictor(const NetworkParams& params, int tile) : pred_(params, tile) {}
    ParameterMaps predict(const ImageBuffer& tile) override { return pred_.predict(tile); }
    std::size_t live_bytes() const override {
        return const_cast<Predictor&>(pred_).graph().activation_bytes();
    }

private:
    Predictor pred_;
};

ParameterMaps infer_with(const NetworkParams& params, const ImageBuffer& img,
                         const RunConfig& cfg) {
    const int block = 1 << params.cfg.depth;
    if (cfg.tile % block != 0)
        throw ConfigError("tiler.tile: " + std::to_string(cfg.tile) +
                          " not divisible by the network's 2^depth = " + std::to_string(block));
    NetTilePredictor predictor(params, cfg.tile);
    return infer_large(img, predictor, cfg.tile, effective_stride(cfg), nullptr);
}

std::string run_csv(const TrainRun& run, const RunConfig& cfg, const char* name) {
    std::string path = join(cfg.output_dir, name);
    write_train_csv(run, path);
    return path;
}

void cmd_pretrain(const RunConfig& cfg) {
    prepare_output_dir(cfg);
    TrainRun run;
    NetworkParams params = pretrain(cfg.net, make_train_config(cfg, true), &run);
    save_network(params, join(cfg.output_dir, cfg.checkpoint_out));
    run_csv(run, cfg, "pretrain_log.csv");
}

void cmd_finetune(const RunConfig& cfg) {
    prepare_output_dir(cfg);
    NetworkParams start = load_checkpoint_path(cfg.checkpoint_in, "paths.checkpoint_in");
    ExemplarSet ex = load_exemplars(cfg);
    TrainRun run;
    NetworkParams params = finetune(start, ex, make_train_config(cfg, false), &run);
    save_network(params, join(cfg.output_dir, cfg.checkpoint_out));
    run_csv(run, cfg, "finetune_log.csv");
}

void cmd_infer(const RunConfig& cfg) {
    prepare_output_dir(cfg);
    NetworkParams params = load_checkpoint_path(cfg.checkpoint_in, "paths.checkpoint_in");
    if (cfg.input_image.empty()) throw ConfigError("paths.input: required for infer");
    ImageBuffer img = read_png(cfg.input_image);
    if (img.channels != 3)
        throw DataError(cfg.input_image + ": expected a 3-channel image, got " +
                        std::to_string(img.channels));

    ParameterMaps maps = infer_with(params, img, cfg);
    if (cfg.substitute_normals) {
        NetworkParams pre = load_checkpoint_path(cfg.checkpoint_pretrained,
                                                 "paths.checkpoint_pretrained");
        ParameterMaps pre_maps = infer_with(pre, img, cfg);
        maps = substitute_normals(maps, pre_maps, true);
    }
    std::string stem = fs::path(cfg.input_image).stem().string();
    write_maps(maps, MapPaths::from_stem(join(cfg.output_dir, stem)));
}

void cmd_render(const RunConfig& cfg) {
    prepare_output_dir(cfg);
    if (cfg.prediction_stem.empty())
        throw ConfigError("paths.prediction: required for render (map-set stem)");
    ParameterMaps maps = read_maps(MapPaths::from_stem(cfg.prediction_stem));
    const double d = 3.14159265358979323846 / 180.0;
    DirectionalLight light;
    light.dir = {std::cos(cfg.render_elevation_deg * d) * std::cos(cfg.render_azimuth_deg * d),
                 std::cos(cfg.render_elevation_deg * d) * std::sin(cfg.render_azimuth_deg * d),
                 std::sin(cfg.render_elevation_deg * d)};
    light.intensity = {cfg.render_intensity, cfg.render_intensity, cfg.render_intensity};
    ImageBuffer img = tonemap(render_image(maps, light, ViewSpec{}, cfg.ambient));
    write_png(join(cfg.output_dir, "render.png"), img, 8);
}

void cmd_preview_augment(const RunConfig& cfg) {
    prepare_output_dir(cfg);
    ExemplarSet ex = load_exemplars(cfg);
    AugmentConfig aug = cfg.augment;
    aug.crop = effective_crop(cfg);
    Rng master(cfg.seed);
    for (int k = 0; k < cfg.preview_count; ++k) {
        Rng rng = master.fork(static_cast<std::uint64_t>(k));
        TrainingSample s = synth_training_sample(ex, rng, aug, cfg.lights, cfg.ambient);
        std::string stem = join(cfg.output_dir, "preview_" + std::to_string(k));
        write_png(stem + "_input.png", s.input, 8);
        write_maps(s.target, MapPaths::from_stem(stem));
    }
}

void cmd_metrics(const RunConfig& cfg) {
    prepare_output_dir(cfg);
    if (cfg.prediction_stem.empty()) throw ConfigError("paths.prediction: required for metrics");
    if (cfg.reference_stem.empty()) throw ConfigError("paths.reference: required for metrics");
    ParameterMaps pred = read_maps(MapPaths::from_stem(cfg.prediction_stem));
    ParameterMaps ref = read_maps(MapPaths::from_stem(cfg.reference_stem));
    RmseRecord r = rmse_metrics(pred, ref, cfg.ambient);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "rmse_normal,rmse_diffuse,rmse_roughness,rmse_specular,rmse_render\n"
                  "%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  r.normal, r.diffuse, r.roughness, r.specular, r.render);
    write_text(join(cfg.output_dir, "metrics.csv"), buf);
    std::fputs(buf, stdout);
}

} // namespace

void execute(const std::string& command, const RunConfig& cfg) {
    if (command == "pretrain") return cmd_pretrain(cfg);
    if (command == "finetune") return cmd_finetune(cfg);
    if (command == "infer") return cmd_infer(cfg);
    if (command == "render") return cmd_render(cfg);
    if (command == "preview-augment") return cmd_preview_augment(cfg);
    if (command == "metrics") return cmd_metrics(cfg);
    throw ConfigError("unknown command '" + command +
                      "' (expected pretrain, finetune, infer, render, preview-augment, metrics)");
}

} // namespace matxfer
