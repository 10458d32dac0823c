#include "matxfer/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "matxfer/errors.hpp"

namespace matxfer {

namespace {

struct ParseFail {
    std::string what;
};

long long to_int(const std::string& raw) {
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(raw.c_str(), &end, 10);
    if (errno != 0 || end == raw.c_str() || *end != '\0')
        throw ParseFail{"'" + raw + "' is not an integer"};
    return v;
}

std::uint64_t to_u64(const std::string& raw) {
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    if (errno != 0 || end == raw.c_str() || *end != '\0' || raw.find('-') != std::string::npos)
        throw ParseFail{"'" + raw + "' is not an unsigned integer"};
    return v;
}

double to_double(const std::string& raw) {
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(raw.c_str(), &end);
    if (errno != 0 || end == raw.c_str() || *end != '\0')
        throw ParseFail{"'" + raw + "' is not a number"};
    return v;
}

bool to_bool(const std::string& raw) {
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw ParseFail{"'" + raw + "' is not a boolean (true/false/1/0)"};
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct KeyDef {
    std::string name;
    bool is_bool;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
KeyDef int_key(const std::string& name, T RunConfig::* member) {
    return {name, false,
            [member](RunConfig& c, const std::string& raw) { c.*member = static_cast<T>(to_int(raw)); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

KeyDef u64_key(const std::string& name, std::uint64_t RunConfig::* member) {
    return {name, false,
            [member](RunConfig& c, const std::string& raw) { c.*member = to_u64(raw); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

KeyDef dbl_key(const std::string& name, std::function<double&(RunConfig&)> ref) {
    return {name, false,
            [ref](RunConfig& c, const std::string& raw) { ref(c) = to_double(raw); },
            [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
}

KeyDef bool_key(const std::string& name, bool RunConfig::* member) {
    return {name, true,
            [member](RunConfig& c, const std::string& raw) { c.*member = to_bool(raw); },
            [member](const RunConfig& c) { return c.*member ? "true" : "false"; }};
}

KeyDef str_key(const std::string& name, std::string RunConfig::* member) {
    return {name, false,
            [member](RunConfig& c, const std::string& raw) { c.*member = raw; },
            [member](const RunConfig& c) { return c.*member; }};
}

KeyDef nested_int(const std::string& name, std::function<int&(RunConfig&)> ref) {
    return {name, false,
            [ref](RunConfig& c, const std::string& raw) { ref(c) = static_cast<int>(to_int(raw)); },
            [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> keys = [] {
        std::vector<KeyDef> k;
        k.push_back(u64_key("run.seed", &RunConfig::seed));
        k.push_back(int_key("run.snapshot_every", &RunConfig::snapshot_every));

        k.push_back(nested_int("net.input_size", [](RunConfig& c) -> int& { return c.net.input_size; }));
        k.push_back(nested_int("net.depth", [](RunConfig& c) -> int& { return c.net.depth; }));
        k.push_back(nested_int("net.base_channels", [](RunConfig& c) -> int& { return c.net.base_channels; }));
        k.push_back(nested_int("net.global_width", [](RunConfig& c) -> int& { return c.net.global_width; }));

        k.push_back(nested_int("augment.crop", [](RunConfig& c) -> int& { return c.augment.crop; }));
        k.push_back(dbl_key("augment.scale_min", [](RunConfig& c) -> double& { return c.augment.scale_min; }));
        k.push_back(dbl_key("augment.scale_max", [](RunConfig& c) -> double& { return c.augment.scale_max; }));
        k.push_back(nested_int("augment.periods_min", [](RunConfig& c) -> int& { return c.augment.periods_min; }));
        k.push_back(nested_int("augment.periods_max", [](RunConfig& c) -> int& { return c.augment.periods_max; }));
        k.push_back(dbl_key("augment.tau_min", [](RunConfig& c) -> double& { return c.augment.tau_min; }));
        k.push_back(dbl_key("augment.tau_max", [](RunConfig& c) -> double& { return c.augment.tau_max; }));

        k.push_back(dbl_key("loss.map_weight_normal", [](RunConfig& c) -> double& { return c.loss.map_weight_normal; }));
        k.push_back(dbl_key("loss.map_weight_diffuse", [](RunConfig& c) -> double& { return c.loss.map_weight_diffuse; }));
        k.push_back(dbl_key("loss.map_weight_roughness", [](RunConfig& c) -> double& { return c.loss.map_weight_roughness; }));
        k.push_back(dbl_key("loss.map_weight_specular", [](RunConfig& c) -> double& { return c.loss.map_weight_specular; }));
        k.push_back(dbl_key("loss.render_weight", [](RunConfig& c) -> double& { return c.loss.render_weight; }));
        k.push_back(nested_int("loss.render_lights", [](RunConfig& c) -> int& { return c.loss.render_lights; }));
        k.push_back(dbl_key("loss.log_c", [](RunConfig& c) -> double& { return c.loss.log_c; }));

        k.push_back(dbl_key("light.elevation_min", [](RunConfig& c) -> double& { return c.lights.elevation_min_deg; }));
        k.push_back(dbl_key("light.elevation_max", [](RunConfig& c) -> double& { return c.lights.elevation_max_deg; }));
        k.push_back(dbl_key("light.intensity_min", [](RunConfig& c) -> double& { return c.lights.intensity_min; }));
        k.push_back(dbl_key("light.intensity_max", [](RunConfig& c) -> double& { return c.lights.intensity_max; }));
        k.push_back(dbl_key("light.gray_prob", [](RunConfig& c) -> double& { return c.lights.gray_prob; }));
        k.push_back(dbl_key("light.ambient", [](RunConfig& c) -> double& { return c.ambient.k_a; }));

        k.push_back(int_key("tiler.tile", &RunConfig::tile));
        k.push_back(int_key("tiler.stride", &RunConfig::stride));

        k.push_back(int_key("pretrain.iterations", &RunConfig::pretrain_iterations));
        k.push_back(dbl_key("pretrain.lr", [](RunConfig& c) -> double& { return c.loss.lr_pretrain; }));
        k.push_back(int_key("pretrain.material_size", &RunConfig::pretrain_material_size));

        k.push_back(int_key("finetune.iterations", &RunConfig::finetune_iterations));
        k.push_back(dbl_key("finetune.lr", [](RunConfig& c) -> double& { return c.loss.lr_finetune; }));
        k.push_back(bool_key("finetune.no_augment", &RunConfig::no_augment));

        k.push_back(bool_key("infer.substitute_normals", &RunConfig::substitute_normals));
        k.push_back(int_key("preview.count", &RunConfig::preview_count));

        k.push_back(dbl_key("render.elevation", [](RunConfig& c) -> double& { return c.render_elevation_deg; }));
        k.push_back(dbl_key("render.azimuth", [](RunConfig& c) -> double& { return c.render_azimuth_deg; }));
        k.push_back(dbl_key("render.intensity", [](RunConfig& c) -> double& { return c.render_intensity; }));

        k.push_back(str_key("paths.checkpoint_in", &RunConfig::checkpoint_in));
        k.push_back(str_key("paths.checkpoint_out", &RunConfig::checkpoint_out));
        k.push_back(str_key("paths.checkpoint_pretrained", &RunConfig::checkpoint_pretrained));
        k.push_back(str_key("paths.exemplars", &RunConfig::exemplar_dir));
        k.push_back(str_key("paths.input", &RunConfig::input_image));
        k.push_back(str_key("paths.output_dir", &RunConfig::output_dir));
        k.push_back(str_key("paths.prediction", &RunConfig::prediction_stem));
        k.push_back(str_key("paths.reference", &RunConfig::reference_stem));
        return k;
    }();
    return keys;
}

const KeyDef* find_key(const std::string& name) {
    for (const KeyDef& k : key_table())
        if (k.name == name) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void apply_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        const KeyDef* def = find_key(key);
        if (!def)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            def->set(cfg, value);
        } catch (const ParseFail& f) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + key + ": " + f.what);
        }
    }
}

// --no-augment and --substitute-normals are spellable without their section.
std::string resolve_alias(const std::string& key) {
    if (key == "no-augment") return "finetune.no_augment";
    if (key == "substitute-normals") return "infer.substitute_normals";
    return key;
}

void apply_flags(RunConfig& cfg, const std::vector<std::string>& flags) {
    for (std::size_t i = 0; i < flags.size(); ++i) {
        const std::string& flag = flags[i];
        if (flag.rfind("--", 0) != 0)
            throw ConfigError("unexpected argument '" + flag + "' (flags are --section.key value)");
        std::string key = flag.substr(2);
        std::string value;
        bool have_value = false;
        std::size_t eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.resize(eq);
            have_value = true;
        }
        key = resolve_alias(key);
        const KeyDef* def = find_key(key);
        if (!def) throw ConfigError(flag + ": unknown key '" + key + "'");
        if (!have_value) {
            const bool next_is_value = i + 1 < flags.size() && flags[i + 1].rfind("--", 0) != 0;
            if (next_is_value) {
                value = flags[++i];
            } else if (def->is_bool) {
                value = "true";
            } else {
                throw ConfigError(flag + ": missing value");
            }
        }
        try {
            def->set(cfg, value);
        } catch (const ParseFail& f) {
            throw ConfigError(flag + ": " + f.what);
        }
    }
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

} // namespace

int effective_crop(const RunConfig& cfg) {
    return cfg.augment.crop > 0 ? cfg.augment.crop : cfg.net.input_size;
}

int effective_stride(const RunConfig& cfg) {
    return cfg.stride == -1 ? cfg.tile / 2 : cfg.stride;
}

void validate_run_config(const RunConfig& cfg) {
    validate_net_config(cfg.net);

    const int crop = effective_crop(cfg);
    const int block = 1 << cfg.net.depth;
    require(crop >= block && crop % block == 0,
            "augment.crop: " + std::to_string(crop) + " not divisible by 2^depth = " +
                std::to_string(block));
    require(cfg.augment.scale_min > 0, "augment.scale_min: must be > 0");
    require(cfg.augment.scale_max >= cfg.augment.scale_min,
            "augment.scale_max: must be >= augment.scale_min");
    require(cfg.augment.periods_min >= 1, "augment.periods_min: must be >= 1");
    require(cfg.augment.periods_max >= cfg.augment.periods_min,
            "augment.periods_max: must be >= augment.periods_min");
    require(cfg.augment.tau_max >= cfg.augment.tau_min,
            "augment.tau_max: must be >= augment.tau_min");

    require(cfg.loss.map_weight_normal >= 0 && cfg.loss.map_weight_diffuse >= 0 &&
                cfg.loss.map_weight_roughness >= 0 && cfg.loss.map_weight_specular >= 0,
            "loss.map_weight_*: must be >= 0");
    require(cfg.loss.render_weight >= 0, "loss.render_weight: must be >= 0");
    require(cfg.loss.render_lights >= 0, "loss.render_lights: must be >= 0");
    require(cfg.loss.log_c > 0, "loss.log_c: must be > 0");
    require(cfg.loss.lr_pretrain > 0, "pretrain.lr: must be > 0");
    require(cfg.loss.lr_finetune > 0, "finetune.lr: must be > 0");

    require(cfg.lights.elevation_min_deg > 0 && cfg.lights.elevation_min_deg <= 90,
            "light.elevation_min: must be in (0, 90]");
    require(cfg.lights.elevation_max_deg >= cfg.lights.elevation_min_deg &&
                cfg.lights.elevation_max_deg <= 90,
            "light.elevation_max: must be in [elevation_min, 90]");
    require(cfg.lights.intensity_min > 0, "light.intensity_min: must be > 0");
    require(cfg.lights.intensity_max >= cfg.lights.intensity_min,
            "light.intensity_max: must be >= light.intensity_min");
    require(cfg.lights.gray_prob >= 0 && cfg.lights.gray_prob <= 1,
            "light.gray_prob: must be in [0, 1]");
    require(cfg.ambient.k_a >= 0, "light.ambient: must be >= 0");

    require(cfg.tile >= 2, "tiler.tile: must be >= 2");
    const int stride = effective_stride(cfg);
    require(stride >= 1, "tiler.stride: must be >= 1");
    require(stride <= cfg.tile, "tiler.stride: must be <= tiler.tile");

    require(cfg.pretrain_iterations >= 0, "pretrain.iterations: must be >= 0");
    require(cfg.finetune_iterations >= 0, "finetune.iterations: must be >= 0");
    require(cfg.pretrain_material_size == 0 || cfg.pretrain_material_size >= 16,
            "pretrain.material_size: must be 0 (auto) or >= 16");
    require(cfg.snapshot_every >= 1, "run.snapshot_every: must be >= 1");
    require(cfg.preview_count >= 1, "preview.count: must be >= 1");

    require(cfg.render_elevation_deg > 0 && cfg.render_elevation_deg <= 90,
            "render.elevation: must be in (0, 90]");
    require(cfg.render_intensity > 0, "render.intensity: must be > 0");
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& flags) {
    RunConfig cfg;
    if (!path.empty()) apply_file(cfg, path);
    apply_flags(cfg, flags);
    validate_run_config(cfg);
    return cfg;
}

std::string render_config(const RunConfig& cfg) {
    std::string out;
    for (const KeyDef& k : key_table()) {
        out += k.name;
        out += " = ";
        out += k.get(cfg);
        out += "\n";
    }
    return out;
}

TrainConfig make_train_config(const RunConfig& cfg, bool is_pretrain) {
    TrainConfig t;
    t.iterations = is_pretrain ? cfg.pretrain_iterations : cfg.finetune_iterations;
    t.seed = cfg.seed;
    t.loss = cfg.loss;
    t.augment = cfg.augment;
    t.augment.crop = effective_crop(cfg);
    t.lights = cfg.lights;
    t.ambient = cfg.ambient;
    t.augment_enabled = !cfg.no_augment;
    t.snapshot_every = cfg.snapshot_every;
    t.pretrain_material_size = cfg.pretrain_material_size;
    return t;
}

} // namespace matxfer
