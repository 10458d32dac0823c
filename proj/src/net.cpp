#include "matxfer/net.hpp"

#include <cmath>

#include "matxfer/checkpoint.hpp"
#include "matxfer/errors.hpp"
#include "matxfer/rng.hpp"

namespace matxfer {

namespace {

constexpr int kKernel = 3;

struct LayerSpec {
    std::string name; // "enc0", "fc1", "dec2", "out"
    bool is_conv;     // conv [O,C,3,3] vs fully-connected [M,N]
    bool has_bias;    // convs feeding instance norm carry none (the norm
                      // removes per-channel shifts, leaving the bias dead)
    int in_ch;
    int out_ch;
};

// Canonical layer list; everything about parameter shapes derives from it.
std::vector<LayerSpec> layer_specs(const NetConfig& cfg) {
    auto ch = [&](int level) { return cfg.base_channels << level; };
    std::vector<LayerSpec> specs;
    for (int i = 0; i < cfg.depth; ++i)
        specs.push_back({"enc" + std::to_string(i), true, false, i == 0 ? 3 : ch(i - 1), ch(i)});
    const int bottleneck = ch(cfg.depth - 1);
    specs.push_back({"fc1", false, true, bottleneck, cfg.global_width});
    specs.push_back({"fc2", false, true, cfg.global_width, bottleneck});
    for (int j = cfg.depth - 2; j >= 0; --j)
        specs.push_back({"dec" + std::to_string(j), true, false,
                         j == cfg.depth - 2 ? bottleneck : 2 * ch(j + 1), ch(j)});
    specs.push_back({"out", true, true, cfg.depth >= 2 ? 2 * ch(0) : ch(0), cfg.output_channels});
    return specs;
}

std::vector<int> weight_shape(const LayerSpec& s) {
    if (s.is_conv) return {s.out_ch, s.in_ch, kKernel, kKernel};
    return {s.out_ch, s.in_ch};
}

} // namespace

void validate_net_config(const NetConfig& cfg) {
    if (cfg.depth < 1) throw ConfigError("net.depth: must be >= 1");
    if (cfg.base_channels < 1) throw ConfigError("net.base_channels: must be >= 1");
    if (cfg.global_width < 1) throw ConfigError("net.global_width: must be >= 1");
    if (cfg.output_channels != 9)
        throw ConfigError("net.output_channels: must be 9 (normal xy + diffuse + roughness + specular)");
    if (cfg.input_size < (1 << cfg.depth))
        throw ConfigError("net.input_size: must be at least 2^depth = " +
                          std::to_string(1 << cfg.depth));
    if (cfg.input_size % (1 << cfg.depth) != 0)
        throw ConfigError("net.input_size: " + std::to_string(cfg.input_size) +
                          " not divisible by 2^depth = " + std::to_string(1 << cfg.depth));
}

std::size_t parameter_count(const NetConfig& cfg) {
    std::size_t total = 0;
    for (const LayerSpec& s : layer_specs(cfg)) {
        total += Tensor::numel_of(weight_shape(s));
        if (s.has_bias) total += static_cast<std::size_t>(s.out_ch);
    }
    return total;
}

NetworkParams init_network(const NetConfig& cfg, std::uint64_t seed) {
    validate_net_config(cfg);
    NetworkParams params;
    params.cfg = cfg;
    Rng rng(seed, 11);
    for (const LayerSpec& s : layer_specs(cfg)) {
        Tensor w(weight_shape(s));
        const std::size_t fan_in = s.is_conv
            ? static_cast<std::size_t>(s.in_ch) * kKernel * kKernel
            : static_cast<std::size_t>(s.in_ch);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (float& v : w.data) v = static_cast<float>(rng.uniform(-bound, bound));
        params.tensors.emplace_back(s.name + ".w", std::move(w));
        if (s.has_bias) params.tensors.emplace_back(s.name + ".b", Tensor({s.out_ch}));
    }
    return params;
}

void validate_network_params(const NetworkParams& params) {
    validate_net_config(params.cfg);
    const std::vector<LayerSpec> specs = layer_specs(params.cfg);
    std::size_t expect_count = 0;
    for (const LayerSpec& s : specs) expect_count += s.has_bias ? 2 : 1;
    if (params.tensors.size() != expect_count)
        throw DataError("network has " + std::to_string(params.tensors.size()) +
                        " tensors, config expects " + std::to_string(expect_count));
    std::size_t idx = 0;
    for (const LayerSpec& s : specs) {
        const auto& [wname, w] = params.tensors[idx++];
        const std::vector<int> expect_w = weight_shape(s);
        if (wname != s.name + ".w" || w.shape != expect_w)
            throw DataError("tensor '" + wname + "' " + w.shape_str() + ", expected '" +
                            s.name + ".w' " + Tensor(expect_w).shape_str());
        for (float v : w.data)
            if (!std::isfinite(v)) throw DataError("tensor '" + wname + "' has non-finite entries");
        if (!s.has_bias) continue;
        const auto& [bname, b] = params.tensors[idx++];
        if (bname != s.name + ".b" || b.shape != std::vector<int>{s.out_ch})
            throw DataError("tensor '" + bname + "' " + b.shape_str() + ", expected '" +
                            s.name + ".b' [" + std::to_string(s.out_ch) + "]");
        for (float v : b.data)
            if (!std::isfinite(v)) throw DataError("tensor '" + bname + "' has non-finite entries");
    }
}

void save_network(const NetworkParams& params, const std::string& path) {
    Checkpoint ckpt;
    ckpt.catalog_version = kOpCatalogVersion;
    ckpt.config_words = {static_cast<std::uint32_t>(params.cfg.input_size),
                         static_cast<std::uint32_t>(params.cfg.depth),
                         static_cast<std::uint32_t>(params.cfg.base_channels),
                         static_cast<std::uint32_t>(params.cfg.global_width),
                         static_cast<std::uint32_t>(params.cfg.output_channels)};
    ckpt.tensors = params.tensors;
    save_checkpoint(ckpt, path);
}

NetworkParams load_network(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.config_words.size() != 5)
        throw DataError("checkpoint " + path + ": expected 5 config words, found " +
                        std::to_string(ckpt.config_words.size()));
    NetworkParams params;
    params.cfg.input_size = static_cast<int>(ckpt.config_words[0]);
    params.cfg.depth = static_cast<int>(ckpt.config_words[1]);
    params.cfg.base_channels = static_cast<int>(ckpt.config_words[2]);
    params.cfg.global_width = static_cast<int>(ckpt.config_words[3]);
    params.cfg.output_channels = static_cast<int>(ckpt.config_words[4]);
    params.tensors = std::move(ckpt.tensors);
    validate_network_params(params);
    return params;
}

Tensor image_to_tensor(const ImageBuffer& img) {
    Tensor t({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.data[(static_cast<std::size_t>(c) * img.height + y) * img.width + x] =
                    img.at(x, y, c);
    return t;
}

ParameterMaps decode_heads(const Tensor& raw) {
    if (raw.ndim() != 3 || raw.dim(0) != 9)
        throw std::invalid_argument("decode_heads: expected [9,H,W], got " + raw.shape_str());
    const int h = raw.dim(1), w = raw.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* d = raw.data.data();

    ParameterMaps m(w, h);
    for (std::size_t p = 0; p < plane; ++p) {
        const double u = std::tanh(d[p]);
        const double v = std::tanh(d[plane + p]);
        const double s = 1.0 - u * u - v * v;
        double nx = u, ny = v, nz;
        if (s > 1e-6) {
            nz = std::sqrt(s);
        } else {
            nz = 1e-3;
            const double len = std::sqrt(u * u + v * v + nz * nz);
            nx /= len; ny /= len; nz /= len;
        }
        m.normal[3 * p] = static_cast<float>(nx);
        m.normal[3 * p + 1] = static_cast<float>(ny);
        m.normal[3 * p + 2] = static_cast<float>(nz);

        for (int c = 0; c < 3; ++c) {
            m.diffuse[3 * p + c] = 1.0f / (1.0f + std::exp(-d[(2 + c) * plane + p]));
            m.specular[3 * p + c] = 1.0f / (1.0f + std::exp(-d[(6 + c) * plane + p]));
        }
        const float sr = 1.0f / (1.0f + std::exp(-d[5 * plane + p]));
        m.roughness[p] = kAlphaMin + (1.0f - kAlphaMin) * sr;
    }
    return m;
}

Tensor heads_backward(const Tensor& raw, const MapGrads& grads) {
    if (raw.ndim() != 3 || raw.dim(0) != 9)
        throw std::invalid_argument("heads_backward: expected [9,H,W], got " + raw.shape_str());
    const int h = raw.dim(1), w = raw.dim(2);
    if (grads.width != w || grads.height != h)
        throw std::invalid_argument("heads_backward: gradient size mismatch");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* d = raw.data.data();

    Tensor out(raw.shape);
    for (std::size_t p = 0; p < plane; ++p) {
        const double u = std::tanh(d[p]);
        const double v = std::tanh(d[plane + p]);
        const double s = 1.0 - u * u - v * v;
        const double gx = grads.normal[3 * p];
        const double gy = grads.normal[3 * p + 1];
        const double gz = grads.normal[3 * p + 2];
        double du, dv;
        if (s > 1e-6) {
            // n = (u, v, sqrt(s)) is unit already; dz/du = -u/z.
            const double z = std::sqrt(s);
            du = gx - gz * (u / z);
            dv = gy - gz * (v / z);
        } else {
            // n = (u, v, 1e-3) / len; d n / d w_j = (e_j - n n_j) / len.
            const double c = 1e-3;
            const double len = std::sqrt(u * u + v * v + c * c);
            const double nx = u / len, ny = v / len, nz = c / len;
            const double gdotn = gx * nx + gy * ny + gz * nz;
            du = (gx - gdotn * nx) / len;
            dv = (gy - gdotn * ny) / len;
        }
        out.data[p] = static_cast<float>(du * (1.0 - u * u));
        out.data[plane + p] = static_cast<float>(dv * (1.0 - v * v));

        for (int c = 0; c < 3; ++c) {
            const double sd = 1.0 / (1.0 + std::exp(-static_cast<double>(d[(2 + c) * plane + p])));
            out.data[(2 + c) * plane + p] =
                static_cast<float>(grads.diffuse[3 * p + c] * sd * (1.0 - sd));
            const double ss = 1.0 / (1.0 + std::exp(-static_cast<double>(d[(6 + c) * plane + p])));
            out.data[(6 + c) * plane + p] =
                static_cast<float>(grads.specular[3 * p + c] * ss * (1.0 - ss));
        }
        const double rs = 1.0 / (1.0 + std::exp(-static_cast<double>(d[5 * plane + p])));
        out.data[5 * plane + p] = static_cast<float>(
            grads.roughness[p] * (1.0 - kAlphaMin) * rs * (1.0 - rs));
    }
    return out;
}

Predictor::Predictor(const NetworkParams& params, int size) : cfg_(params.cfg), size_(size) {
    validate_network_params(params);
    if (size < (1 << cfg_.depth) || size % (1 << cfg_.depth) != 0)
        throw ConfigError("predictor size " + std::to_string(size) +
                          " not divisible by 2^depth = " + std::to_string(1 << cfg_.depth));

    std::size_t next = 0;
    auto take = [&](const std::string& name) {
        const auto& [tname, t] = params.tensors[next];
        if (tname != name)
            throw DataError("tensor '" + tname + "' where '" + name + "' was expected");
        ++next;
        return g_.param(t, tname);
    };

    input_ = g_.input({3, size, size}, "input");
    int cur = input_;
    std::vector<int> skips;
    for (int i = 0; i < cfg_.depth; ++i) {
        int w = take("enc" + std::to_string(i) + ".w");
        cur = g_.conv2d(cur, w, -1, 2);
        cur = g_.instance_norm(cur);
        cur = g_.leaky_relu(cur);
        skips.push_back(cur);
    }

    // Global track: pooled bottleneck features pushed back onto every
    // bottleneck pixel.
    int gap = g_.global_avg_pool(cur);
    int fc1w = take("fc1.w"), fc1b = take("fc1.b");
    int t1 = g_.tanh(g_.fully_connected(gap, fc1w, fc1b));
    int fc2w = take("fc2.w"), fc2b = take("fc2.b");
    int fc2 = g_.fully_connected(t1, fc2w, fc2b);
    cur = g_.add(cur, fc2);

    for (int j = cfg_.depth - 2; j >= 0; --j) {
        int w = take("dec" + std::to_string(j) + ".w");
        cur = g_.upsample2(cur);
        cur = g_.conv2d(cur, w, -1, 1);
        cur = g_.instance_norm(cur);
        cur = g_.leaky_relu(cur);
        cur = g_.concat(cur, skips[static_cast<std::size_t>(j)]);
    }

    int ow = take("out.w"), ob = take("out.b");
    cur = g_.upsample2(cur);
    output_ = g_.conv2d(cur, ow, ob, 1);
}

Predictor::Predictor(const NetworkParams& params) : Predictor(params, params.cfg.input_size) {}

ParameterMaps Predictor::predict(const ImageBuffer& img) {
    if (img.width != size_ || img.height != size_ || img.channels != 3)
        throw DataError("predictor expects 3x" + std::to_string(size_) + "x" +
                        std::to_string(size_) + " input, got " + std::to_string(img.channels) +
                        "x" + std::to_string(img.height) + "x" + std::to_string(img.width));
    g_.set_input(input_, image_to_tensor(img));
    g_.forward();
    return decode_heads(g_.value(output_));
}

NetworkParams Predictor::export_params() const {
    NetworkParams out;
    out.cfg = cfg_;
    for (int p : g_.params())
        out.tensors.emplace_back(g_.node_name(p), g_.value(p));
    return out;
}

ParameterMaps predict_tile(const NetworkParams& params, const ImageBuffer& img) {
    Predictor pred(params, img.width);
    return pred.predict(img);
}

} // namespace matxfer
