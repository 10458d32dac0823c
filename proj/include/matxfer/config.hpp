#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matxfer/augment.hpp"
#include "matxfer/losses.hpp"
#include "matxfer/net.hpp"
#include "matxfer/train.hpp"

namespace matxfer {

// Everything a run needs, addressable as `section.key` from the config file
// and from `--section.key value` flags.
struct RunConfig {
    std::uint64_t seed = 1;

    NetConfig net;
    AugmentConfig augment;       // augment.crop 0 -> net.input_size
    LossConfig loss;
    LightDistribution lights;
    AmbientTerm ambient;

    int tile = 512;
    int stride = -1;             // -1 -> tile / 2

    int pretrain_iterations = 2000;
    int finetune_iterations = 1000;
    int pretrain_material_size = 0; // 0 -> 2 * crop
    int snapshot_every = 10;
    bool no_augment = false;
    bool substitute_normals = false;
    int preview_count = 4;

    double render_elevation_deg = 60.0;
    double render_azimuth_deg = 0.0;
    double render_intensity = 3.0;

    std::string checkpoint_in;
    std::string checkpoint_out = "checkpoint.mxn";
    std::string checkpoint_pretrained; // for --substitute-normals
    std::string exemplar_dir;
    std::string input_image;
    std::string output_dir = ".";
    std::string prediction_stem;
    std::string reference_stem;

    RunConfig() { augment.crop = 0; }
};

// Parse `key = value` lines (# comments, blank lines allowed), then apply
// flag overrides. Unknown keys, unparsable values, and out-of-range values
// throw ConfigError naming the file:line or flag. An empty path skips the
// file. Flags are ["--section.key", "value", ...]; `--key=value` works too;
// boolean keys may omit the value.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& flags);

// Range checks shared by parse_config and the command layer.
void validate_run_config(const RunConfig& cfg);

// Effective crop / stride after defaults are resolved.
int effective_crop(const RunConfig& cfg);
int effective_stride(const RunConfig& cfg);

// Every known key with its current value, in stable order, as config-file
// text. Written next to the artifacts for provenance.
std::string render_config(const RunConfig& cfg);

TrainConfig make_train_config(const RunConfig& cfg, bool is_pretrain);

} // namespace matxfer
