#include "matxfer/losses.hpp"

#include <cmath>

#include "matxfer/errors.hpp"
#include "matxfer/image.hpp"

namespace matxfer {

namespace {

void require_same_size(const ParameterMaps& a, const ParameterMaps& b, const char* who) {
    if (a.width != b.width || a.height != b.height)
        throw DataError(std::string(who) + ": dimensions differ: " + std::to_string(a.width) +
                        "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height));
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

TexelBrdf texel_of(const ParameterMaps& m, std::size_t p) {
    TexelBrdf t;
    t.n = {m.normal[3 * p], m.normal[3 * p + 1], m.normal[3 * p + 2]};
    t.rho_d = {m.diffuse[3 * p], m.diffuse[3 * p + 1], m.diffuse[3 * p + 2]};
    t.rho_s = {m.specular[3 * p], m.specular[3 * p + 1], m.specular[3 * p + 2]};
    t.alpha = m.roughness[p];
    return t;
}

} // namespace

double map_loss(const ParameterMaps& pred, const ParameterMaps& gt, const LossConfig& cfg) {
    require_same_size(pred, gt, "map_loss");
    const std::size_t n = pred.pixel_count();
    double acc_n = 0.0, acc_d = 0.0, acc_r = 0.0, acc_s = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        float enc_p[3], enc_g[3];
        encode_normal(&pred.normal[3 * p], enc_p);
        encode_normal(&gt.normal[3 * p], enc_g);
        for (int c = 0; c < 3; ++c) {
            acc_n += std::fabs(static_cast<double>(enc_p[c]) - enc_g[c]);
            acc_d += std::fabs(static_cast<double>(pred.diffuse[3 * p + c]) - gt.diffuse[3 * p + c]);
            acc_s += std::fabs(static_cast<double>(pred.specular[3 * p + c]) - gt.specular[3 * p + c]);
        }
        acc_r += std::fabs(static_cast<double>(pred.roughness[p]) - gt.roughness[p]);
    }
    const double inv3 = 1.0 / (3.0 * static_cast<double>(n));
    const double inv1 = 1.0 / static_cast<double>(n);
    return cfg.map_weight_normal * acc_n * inv3 + cfg.map_weight_diffuse * acc_d * inv3 +
           cfg.map_weight_roughness * acc_r * inv1 + cfg.map_weight_specular * acc_s * inv3;
}

double map_loss_backward(const ParameterMaps& pred, const ParameterMaps& gt,
                         const LossConfig& cfg, MapGrads& grads) {
    require_same_size(pred, gt, "map_loss");
    const std::size_t n = pred.pixel_count();
    if (grads.width != pred.width || grads.height != pred.height)
        grads = MapGrads(pred.width, pred.height);

    const double inv3 = 1.0 / (3.0 * static_cast<double>(n));
    const double inv1 = 1.0 / static_cast<double>(n);
    double acc_n = 0.0, acc_d = 0.0, acc_r = 0.0, acc_s = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        float enc_p[3], enc_g[3];
        encode_normal(&pred.normal[3 * p], enc_p);
        encode_normal(&gt.normal[3 * p], enc_g);
        for (int c = 0; c < 3; ++c) {
            const double dn = static_cast<double>(enc_p[c]) - enc_g[c];
            acc_n += std::fabs(dn);
            // d enc / d n = 1/2
            grads.normal[3 * p + c] += static_cast<float>(
                cfg.map_weight_normal * sign(dn) * inv3 * 0.5);

            const double dd = static_cast<double>(pred.diffuse[3 * p + c]) - gt.diffuse[3 * p + c];
            acc_d += std::fabs(dd);
            grads.diffuse[3 * p + c] += static_cast<float>(cfg.map_weight_diffuse * sign(dd) * inv3);

            const double ds = static_cast<double>(pred.specular[3 * p + c]) - gt.specular[3 * p + c];
            acc_s += std::fabs(ds);
            grads.specular[3 * p + c] += static_cast<float>(cfg.map_weight_specular * sign(ds) * inv3);
        }
        const double dr = static_cast<double>(pred.roughness[p]) - gt.roughness[p];
        acc_r += std::fabs(dr);
        grads.roughness[p] += static_cast<float>(cfg.map_weight_roughness * sign(dr) * inv1);
    }
    return cfg.map_weight_normal * acc_n * inv3 + cfg.map_weight_diffuse * acc_d * inv3 +
           cfg.map_weight_roughness * acc_r * inv1 + cfg.map_weight_specular * acc_s * inv3;
}

double rendering_loss(const ParameterMaps& pred, const ParameterMaps& gt,
                      const std::vector<DirectionalLight>& lights, const ViewSpec& view,
                      const AmbientTerm& ambient, const LossConfig& cfg) {
    require_same_size(pred, gt, "rendering_loss");
    if (lights.empty()) throw DataError("rendering_loss: needs at least one light");
    const std::size_t n = pred.pixel_count();
    const double c = cfg.log_c;
    double acc = 0.0;
    for (const DirectionalLight& light : lights) {
        for (std::size_t p = 0; p < n; ++p) {
            Vec3 rp = shade_texel(texel_of(pred, p), light, view, ambient);
            Vec3 rg = shade_texel(texel_of(gt, p), light, view, ambient);
            for (int ch = 0; ch < 3; ++ch)
                acc += std::fabs(std::log(rp[ch] + c) - std::log(rg[ch] + c));
        }
    }
    return cfg.render_weight * acc / (3.0 * static_cast<double>(n) * lights.size());
}

double rendering_loss_backward(const ParameterMaps& pred, const ParameterMaps& gt,
                               const std::vector<DirectionalLight>& lights, const ViewSpec& view,
                               const AmbientTerm& ambient, const LossConfig& cfg, MapGrads& grads) {
    require_same_size(pred, gt, "rendering_loss");
    if (lights.empty()) throw DataError("rendering_loss: needs at least one light");
    const std::size_t n = pred.pixel_count();
    if (grads.width != pred.width || grads.height != pred.height)
        grads = MapGrads(pred.width, pred.height);

    const double c = cfg.log_c;
    const double norm = cfg.render_weight / (3.0 * static_cast<double>(n) * lights.size());
    double acc = 0.0;
    for (const DirectionalLight& light : lights) {
        for (std::size_t p = 0; p < n; ++p) {
            const TexelBrdf tp = texel_of(pred, p);
            Vec3 rp = shade_texel(tp, light, view, ambient);
            Vec3 rg = shade_texel(texel_of(gt, p), light, view, ambient);
            ShadeGradient sg = shade_texel_gradient(tp, light, view, ambient);
            for (int ch = 0; ch < 3; ++ch) {
                const double diff = std::log(rp[ch] + c) - std::log(rg[ch] + c);
                acc += std::fabs(diff);
                // d|log(rp+c) - .|/d rp = sign / (rp + c)
                const double dch = norm * sign(diff) / (rp[ch] + c);
                for (int k = 0; k < 3; ++k)
                    grads.normal[3 * p + k] += static_cast<float>(dch * sg.d_n[ch][k]);
                grads.diffuse[3 * p + ch] += static_cast<float>(dch * sg.d_rho_d[ch]);
                grads.specular[3 * p + ch] += static_cast<float>(dch * sg.d_rho_s[ch]);
                grads.roughness[p] += static_cast<float>(dch * sg.d_alpha[ch]);
            }
        }
    }
    return norm * acc;
}

const std::array<DirectionalLight, 5>& validation_lights() {
    auto dir = [](double elev_deg, double azim_deg) {
        const double d = 3.14159265358979323846 / 180.0;
        return Vec3{std::cos(elev_deg * d) * std::cos(azim_deg * d),
                    std::cos(elev_deg * d) * std::sin(azim_deg * d), std::sin(elev_deg * d)};
    };
    static const std::array<DirectionalLight, 5> lights = {{
        {dir(90, 0), {3.0, 3.0, 3.0}},
        {dir(60, 0), {2.5, 2.5, 2.5}},
        {dir(60, 120), {2.5, 2.5, 2.5}},
        {dir(35, 240), {2.0, 2.0, 2.0}},
        {dir(45, 300), {3.0, 2.0, 1.0}},
    }};
    return lights;
}

RmseRecord rmse_metrics(const ParameterMaps& pred, const ParameterMaps& gt,
                        const AmbientTerm& ambient) {
    require_same_size(pred, gt, "rmse_metrics");
    const std::size_t n = pred.pixel_count();
    RmseRecord r;
    double acc_n = 0.0, acc_d = 0.0, acc_r = 0.0, acc_s = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        float enc_p[3], enc_g[3];
        encode_normal(&pred.normal[3 * p], enc_p);
        encode_normal(&gt.normal[3 * p], enc_g);
        for (int c = 0; c < 3; ++c) {
            const double dn = static_cast<double>(enc_p[c]) - enc_g[c];
            const double dd = static_cast<double>(pred.diffuse[3 * p + c]) - gt.diffuse[3 * p + c];
            const double ds = static_cast<double>(pred.specular[3 * p + c]) - gt.specular[3 * p + c];
            acc_n += dn * dn;
            acc_d += dd * dd;
            acc_s += ds * ds;
        }
        const double dr = static_cast<double>(pred.roughness[p]) - gt.roughness[p];
        acc_r += dr * dr;
    }
    r.normal = std::sqrt(acc_n / (3.0 * static_cast<double>(n)));
    r.diffuse = std::sqrt(acc_d / (3.0 * static_cast<double>(n)));
    r.roughness = std::sqrt(acc_r / static_cast<double>(n));
    r.specular = std::sqrt(acc_s / (3.0 * static_cast<double>(n)));

    double acc_render = 0.0;
    for (const DirectionalLight& light : validation_lights()) {
        ImageBuffer ip = tonemap(render_image(pred, light, ViewSpec{}, ambient));
        ImageBuffer ig = tonemap(render_image(gt, light, ViewSpec{}, ambient));
        for (std::size_t i = 0; i < ip.data.size(); ++i) {
            const double d = static_cast<double>(ip.data[i]) - ig.data[i];
            acc_render += d * d;
        }
    }
    r.render = std::sqrt(acc_render / (3.0 * static_cast<double>(n) * validation_lights().size()));
    return r;
}

} // namespace matxfer
