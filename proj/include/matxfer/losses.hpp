#pragma once

#include <array>
#include <vector>

#include "matxfer/brdf.hpp"
#include "matxfer/maps.hpp"

namespace matxfer {

struct LossConfig {
    double map_weight_normal = 1.0;
    double map_weight_diffuse = 1.0;
    double map_weight_roughness = 1.0;
    double map_weight_specular = 1.0;
    double render_weight = 1.0;
    int render_lights = 3;    // lights sampled per training step
    double log_c = 0.01;      // offset inside log(render + c)
    double lr_pretrain = 2e-5;
    double lr_finetune = 2e-5;
};

// d(loss)/d(predicted map values), same layout as ParameterMaps. The normal
// slot holds the gradient with respect to the decoded unit-normal
// components, not the RGB encoding.
struct MapGrads {
    int width = 0;
    int height = 0;
    std::vector<float> normal;    // 3 per pixel
    std::vector<float> diffuse;   // 3 per pixel
    std::vector<float> roughness; // 1 per pixel
    std::vector<float> specular;  // 3 per pixel

    MapGrads() = default;
    MapGrads(int w, int h)
        : width(w), height(h),
          normal(static_cast<std::size_t>(w) * h * 3, 0.f),
          diffuse(static_cast<std::size_t>(w) * h * 3, 0.f),
          roughness(static_cast<std::size_t>(w) * h, 0.f),
          specular(static_cast<std::size_t>(w) * h * 3, 0.f) {}
};

// Weighted sum over maps of the mean absolute error, normals compared in
// RGB encoding. Symmetric, zero iff equal.
double map_loss(const ParameterMaps& pred, const ParameterMaps& gt, const LossConfig& cfg);

// Same value; also accumulates d(loss)/d(pred) into `grads`.
double map_loss_backward(const ParameterMaps& pred, const ParameterMaps& gt,
                         const LossConfig& cfg, MapGrads& grads);

// Mean over lights and pixels of |log(render(pred)+c) - log(render(gt)+c)|,
// scaled by cfg.render_weight.
double rendering_loss(const ParameterMaps& pred, const ParameterMaps& gt,
                      const std::vector<DirectionalLight>& lights, const ViewSpec& view,
                      const AmbientTerm& ambient, const LossConfig& cfg);

double rendering_loss_backward(const ParameterMaps& pred, const ParameterMaps& gt,
                               const std::vector<DirectionalLight>& lights, const ViewSpec& view,
                               const AmbientTerm& ambient, const LossConfig& cfg, MapGrads& grads);

struct RmseRecord {
    double normal = 0.0;   // RGB-encoded space
    double diffuse = 0.0;
    double roughness = 0.0;
    double specular = 0.0;
    double render = 0.0;   // tonemapped renders under the validation lights
    double map_average() const { return (normal + diffuse + roughness + specular) / 4.0; }
};

// The fixed 5-light set used for the rendering RMSE and any validation
// rendering that must be deterministic.
const std::array<DirectionalLight, 5>& validation_lights();

RmseRecord rmse_metrics(const ParameterMaps& pred, const ParameterMaps& gt,
                        const AmbientTerm& ambient = {});

} // namespace matxfer
