#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "matxfer/graph.hpp"
#include "matxfer/image.hpp"
#include "matxfer/losses.hpp"
#include "matxfer/maps.hpp"

namespace matxfer {

struct NetConfig {
    int input_size = 64;      // training tile side, divisible by 2^depth
    int depth = 4;            // down/up levels
    int base_channels = 8;    // channels double per level
    int global_width = 16;    // bottleneck global-feature track
    int output_channels = 9;  // normal xy + diffuse 3 + roughness 1 + specular 3
};

// Throws ConfigError naming the offending field.
void validate_net_config(const NetConfig& cfg);

// Closed-form total tensor entries over all layers for this config.
std::size_t parameter_count(const NetConfig& cfg);

struct NetworkParams {
    NetConfig cfg;
    std::vector<std::pair<std::string, Tensor>> tensors; // canonical layer order
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases,
// deterministic in the seed.
NetworkParams init_network(const NetConfig& cfg, std::uint64_t seed);

// Checks names and shapes against the closed-form layer list for
// params.cfg; throws DataError naming the first offending tensor.
void validate_network_params(const NetworkParams& params);

void save_network(const NetworkParams& params, const std::string& path);
NetworkParams load_network(const std::string& path);

// [0,1] HWC image -> CHW tensor and back.
Tensor image_to_tensor(const ImageBuffer& img);

// Raw 9-channel net output -> valid maps. Channels: 0,1 normal xy (tanh,
// z reconstructed and the vector renormalized), 2-4 diffuse (sigmoid),
// 5 roughness (sigmoid rescaled to [kAlphaMin,1]), 6-8 specular (sigmoid).
ParameterMaps decode_heads(const Tensor& raw);

// Chain rule through decode_heads: d(loss)/d(maps) -> d(loss)/d(raw).
Tensor heads_backward(const Tensor& raw, const MapGrads& grads);

// The encoder-decoder graph instantiated at a given spatial size (any
// multiple of 2^depth; training uses cfg.input_size, tiled inference may
// rebuild at the tile size). Owns the parameters for its lifetime.
class Predictor {
public:
    Predictor(const NetworkParams& params, int size);
    explicit Predictor(const NetworkParams& params);

    const NetConfig& config() const { return cfg_; }
    int size() const { return size_; }

    // img: tonemapped rendering, spatial size = size(), 3 channels.
    ParameterMaps predict(const ImageBuffer& img);

    // Training access: feed an input, read the raw output node, seed an
    // external cotangent.
    Graph& graph() { return g_; }
    int input_node() const { return input_; }
    int output_node() const { return output_; }

    // Current parameter values, in the same canonical order as init_network.
    NetworkParams export_params() const;

private:
    NetConfig cfg_;
    int size_;
    Graph g_;
    int input_ = -1;
    int output_ = -1;
};

// One-shot convenience wrapper around Predictor.
ParameterMaps predict_tile(const NetworkParams& params, const ImageBuffer& img);

} // namespace matxfer
