#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matxfer/augment.hpp"
#include "matxfer/losses.hpp"
#include "matxfer/net.hpp"

namespace matxfer {

struct TrainConfig {
    int iterations = 1000;
    std::uint64_t seed = 1;
    LossConfig loss;
    AugmentConfig augment;
    LightDistribution lights;
    AmbientTerm ambient;
    bool augment_enabled = true; // finetune only; false = raw exemplars
    int snapshot_every = 10;
    int pretrain_material_size = 0; // 0 -> 2 * augment.crop
};

struct TrainRun {
    std::uint64_t seed = 0;
    std::vector<double> loss_log; // one entry per iteration
    struct Snapshot {
        int iteration; // steps completed when taken
        RmseRecord rmse;
    };
    std::vector<Snapshot> snapshots;
};

// CSV with header iteration,total_loss,rmse_normal,rmse_diffuse,
// rmse_roughness,rmse_specular; one row per iteration carrying the most
// recent validation snapshot.
void write_train_csv(const TrainRun& run, const std::string& path);

// Train from scratch on synthetic collages of two fresh procedural
// materials per iteration. Deterministic in (cfg, seed).
NetworkParams pretrain(const NetConfig& net_cfg, const TrainConfig& cfg, TrainRun* run);

// Continue training `start` on collage samples from the exemplar set.
// Validation snapshots use a deterministic center crop of the first
// exemplar. With cfg.augment_enabled false, each iteration trains on the
// center crop of one exemplar instead of a synthesized collage (lighting
// still varies).
NetworkParams finetune(const NetworkParams& start, const ExemplarSet& ex,
                       const TrainConfig& cfg, TrainRun* run);

} // namespace matxfer
