#include "matxfer/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "matxfer/adam.hpp"
#include "matxfer/errors.hpp"
#include "matxfer/procedural.hpp"

namespace matxfer {

namespace {

// Center crop used for validation snapshots; a fixed head-on-ish light keeps
// the snapshot input deterministic and disjoint from the training stream.
TrainingSample validation_sample(const ParameterMaps& source, int crop, const AmbientTerm& ambient) {
    TrainingSample s;
    int x0 = (source.width - crop) / 2;
    int y0 = (source.height - crop) / 2;
    s.target = crop_maps(source, x0, y0, crop, crop);
    s.input = tonemap(render_image(s.target, validation_lights()[1], ViewSpec{}, ambient));
    return s;
}

struct LoopContext {
    Predictor* pred;
    Adam* adam;
    const TrainConfig* cfg;
    TrainRun* run;
    const TrainingSample* val;
};

void snapshot(LoopContext& ctx, int iteration) {
    if (!ctx.run || !ctx.val) return;
    ParameterMaps maps = ctx.pred->predict(ctx.val->input);
    ctx.run->snapshots.push_back({iteration, rmse_metrics(maps, ctx.val->target, ctx.cfg->ambient)});
}

void train_step(LoopContext& ctx, const TrainingSample& sample, Rng& iter_rng, int iteration) {
    Graph& g = ctx.pred->graph();
    g.set_input(ctx.pred->input_node(), image_to_tensor(sample.input));
    g.forward();
    const Tensor& raw = g.value(ctx.pred->output_node());
    ParameterMaps maps = decode_heads(raw);

    MapGrads grads(maps.width, maps.height);
    const LossConfig& loss_cfg = ctx.cfg->loss;
    double loss = map_loss_backward(maps, sample.target, loss_cfg, grads);
    if (loss_cfg.render_weight > 0.0 && loss_cfg.render_lights > 0) {
        std::vector<DirectionalLight> lights;
        lights.reserve(static_cast<std::size_t>(loss_cfg.render_lights));
        for (int li = 0; li < loss_cfg.render_lights; ++li)
            lights.push_back(sample_light(iter_rng, ctx.cfg->lights));
        loss += rendering_loss_backward(maps, sample.target, lights, ViewSpec{}, ctx.cfg->ambient,
                                        loss_cfg, grads);
    }
    if (!std::isfinite(loss))
        throw NumericError("iteration " + std::to_string(iteration) + ": non-finite loss");

    g.backward_from(ctx.pred->output_node(), heads_backward(raw, grads));
    ctx.adam->step(g);
    if (ctx.run) ctx.run->loss_log.push_back(loss);
}

void run_loop(LoopContext& ctx, Rng& master,
              const std::function<TrainingSample(Rng&, int)>& make_sample) {
    if (ctx.run) {
        ctx.run->seed = ctx.cfg->seed;
        ctx.run->loss_log.reserve(static_cast<std::size_t>(ctx.cfg->iterations));
    }
    snapshot(ctx, 0);
    for (int it = 0; it < ctx.cfg->iterations; ++it) {
        Rng iter_rng = master.fork(static_cast<std::uint64_t>(it));
        TrainingSample sample = make_sample(iter_rng, it);
        train_step(ctx, sample, iter_rng, it);
        const int done = it + 1;
        if (done % ctx.cfg->snapshot_every == 0 || done == ctx.cfg->iterations)
            snapshot(ctx, done);
    }
}

} // namespace

void write_train_csv(const TrainRun& run, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "iteration,total_loss,rmse_normal,rmse_diffuse,rmse_roughness,rmse_specular\n";
    char buf[256];
    std::size_t snap = 0;
    for (std::size_t i = 0; i < run.loss_log.size(); ++i) {
        const int iteration = static_cast<int>(i) + 1;
        while (snap + 1 < run.snapshots.size() && run.snapshots[snap + 1].iteration <= iteration)
            ++snap;
        const RmseRecord& r = snap < run.snapshots.size() ? run.snapshots[snap].rmse : RmseRecord{};
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", iteration,
                      run.loss_log[i], r.normal, r.diffuse, r.roughness, r.specular);
        out << buf;
    }
}

NetworkParams pretrain(const NetConfig& net_cfg, const TrainConfig& cfg, TrainRun* run) {
    validate_net_config(net_cfg);
    NetworkParams init = init_network(net_cfg, cfg.seed);
    if (cfg.iterations == 0) {
        if (run) run->seed = cfg.seed;
        return init;
    }

    Predictor pred(init, cfg.augment.crop);
    Adam adam(AdamConfig{cfg.loss.lr_pretrain, 0.9, 0.999, 1e-8});
    Rng master(cfg.seed);

    const int msize = cfg.pretrain_material_size > 0 ? cfg.pretrain_material_size
                                                     : 2 * cfg.augment.crop;
    // Fixed validation pair, drawn outside the per-iteration fork range.
    Rng val_rng = master.fork(0xfffffffffffffff0ULL);
    ParameterMaps val_mat = procedural_material(val_rng.next_u64(), msize);
    TrainingSample val = validation_sample(val_mat, cfg.augment.crop, cfg.ambient);

    LoopContext ctx{&pred, &adam, &cfg, run, &val};
    run_loop(ctx, master, [&](Rng& iter_rng, int) {
        ExemplarSet pair;
        pair.patches.push_back(procedural_material(iter_rng.next_u64(), msize));
        pair.patches.push_back(procedural_material(iter_rng.next_u64(), msize));
        return synth_training_sample(pair, iter_rng, cfg.augment, cfg.lights, cfg.ambient);
    });
    return pred.export_params();
}

NetworkParams finetune(const NetworkParams& start, const ExemplarSet& ex,
                       const TrainConfig& cfg, TrainRun* run) {
    validate_network_params(start);
    validate_exemplar_set(ex, cfg.augment.crop);
    if (cfg.iterations == 0) {
        if (run) run->seed = cfg.seed;
        return start;
    }

    Predictor pred(start, cfg.augment.crop);
    Adam adam(AdamConfig{cfg.loss.lr_finetune, 0.9, 0.999, 1e-8});
    Rng master(cfg.seed);
    TrainingSample val = validation_sample(ex.patches[0], cfg.augment.crop, cfg.ambient);

    LoopContext ctx{&pred, &adam, &cfg, run, &val};
    run_loop(ctx, master, [&](Rng& iter_rng, int) {
        if (cfg.augment_enabled)
            return synth_training_sample(ex, iter_rng, cfg.augment, cfg.lights, cfg.ambient);
        // Ablation path: the raw exemplar (center crop at tile size), no
        // mask, no scale/crop; the light still varies.
        const ParameterMaps& patch =
            ex.patches[static_cast<std::size_t>(iter_rng.uniform_int(
                static_cast<int>(ex.patches.size())))];
        TrainingSample s;
        s.target = crop_maps(patch, (patch.width - cfg.augment.crop) / 2,
                             (patch.height - cfg.augment.crop) / 2, cfg.augment.crop,
                             cfg.augment.crop);
        DirectionalLight light = sample_light(iter_rng, cfg.lights);
        s.input = tonemap(render_image(s.target, light, ViewSpec{}, cfg.ambient));
        return s;
    });
    return pred.export_params();
}

} // namespace matxfer
