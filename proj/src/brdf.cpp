#include "matxfer/brdf.hpp"

#include <cmath>
#include <cstring>

namespace matxfer {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHorizonEps = 1e-4;

double ggx_d(double ch, double alpha) {
    double a2 = alpha * alpha;
    double q = ch * ch * (a2 - 1.0) + 1.0;
    return a2 / (kPi * q * q);
}

// Smith G1 for one direction, c = cosine against the normal.
double smith_g1(double c, double alpha) {
    double a2 = alpha * alpha;
    double r = std::sqrt(a2 + (1.0 - a2) * c * c);
    return 2.0 * c / (c + r);
}

} // namespace

Vec3 shade_texel(const TexelBrdf& t, const DirectionalLight& l,
                 const ViewSpec& v, const AmbientTerm& a) {
    const double cl = dot(t.n, l.dir);
    const double cv = dot(t.n, v.dir);

    Vec3 out = a.k_a * (t.rho_d + t.rho_s);
    if (cl <= 0.0) return out;

    // Diffuse
    out += (cl / kPi) * (l.intensity * t.rho_d);

    // Specular, zeroed at or below the horizon
    if (cv > 0.0) {
        Vec3 h = normalize(l.dir + v.dir);
        double ch = dot(t.n, h);
        double hv = dot(h, v.dir);
        double d = ggx_d(ch, t.alpha);
        double g = smith_g1(cl, t.alpha) * smith_g1(cv, t.alpha);
        double w5 = std::pow(1.0 - hv, 5.0);
        Vec3 fresnel = t.rho_s + w5 * (Vec3{1, 1, 1} - t.rho_s);
        double s = cl * d * g / (4.0 * cl * cv);
        out += s * (l.intensity * fresnel);
    }
    return out;
}

ShadeGradient shade_texel_gradient(const TexelBrdf& t, const DirectionalLight& l,
                                   const ViewSpec& v, const AmbientTerm& a) {
    ShadeGradient grad;
    std::memset(&grad, 0, sizeof(grad));

    const Vec3 I = l.intensity;
    const double cl = dot(t.n, l.dir);
    const double cv = dot(t.n, v.dir);

    // Ambient: k_a on both albedo diagonals
    for (int c = 0; c < 3; ++c) {
        grad.d_rho_d[c] = a.k_a;
        grad.d_rho_s[c] = a.k_a;
    }
    if (cl <= 0.0) return grad; // max(n.l, 0) kills diffuse and specular

    // Diffuse: I_c * cl * rho_d_c / pi
    const double rho_d_v[3] = {t.rho_d.x, t.rho_d.y, t.rho_d.z};
    for (int c = 0; c < 3; ++c) {
        grad.d_rho_d[c] += I[c] * cl / kPi;
        grad.d_n[c][0] += I[c] * rho_d_v[c] / kPi * l.dir.x;
        grad.d_n[c][1] += I[c] * rho_d_v[c] / kPi * l.dir.y;
        grad.d_n[c][2] += I[c] * rho_d_v[c] / kPi * l.dir.z;
    }

    // Specular; zero subgradient at and below the horizon guard.
    if (cl <= kHorizonEps || cv <= kHorizonEps) return grad;

    const double alpha = t.alpha;
    const double a2 = alpha * alpha;
    const Vec3 h = normalize(l.dir + v.dir);
    const double ch = dot(t.n, h);
    const double hv = dot(h, v.dir);

    const double q = ch * ch * (a2 - 1.0) + 1.0;
    const double d = a2 / (kPi * q * q);
    const double dd_dch = -4.0 * a2 * ch * (a2 - 1.0) / (kPi * q * q * q);
    const double dd_dalpha = (2.0 * alpha * q - 4.0 * alpha * a2 * ch * ch) / (kPi * q * q * q);

    const double rl = std::sqrt(a2 + (1.0 - a2) * cl * cl);
    const double rv = std::sqrt(a2 + (1.0 - a2) * cv * cv);
    const double g1l = 2.0 * cl / (cl + rl);
    const double g1v = 2.0 * cv / (cv + rv);
    const double dg1l_dcl = 2.0 * a2 / (rl * (cl + rl) * (cl + rl));
    const double dg1v_dcv = 2.0 * a2 / (rv * (cv + rv) * (cv + rv));
    const double dg1l_dalpha = -2.0 * cl * alpha * (1.0 - cl * cl) / (rl * (cl + rl) * (cl + rl));
    const double dg1v_dalpha = -2.0 * cv * alpha * (1.0 - cv * cv) / (rv * (cv + rv) * (cv + rv));

    const double w5 = std::pow(1.0 - hv, 5.0);
    const double rho_s_v[3] = {t.rho_s.x, t.rho_s.y, t.rho_s.z};

    // Specular radiance for channel c: S_c = I_c * F_c * d * g1l * g1v / (4 cv)
    const double base = d * g1l * g1v / (4.0 * cv);
    for (int c = 0; c < 3; ++c) {
        const double fr = rho_s_v[c] + w5 * (1.0 - rho_s_v[c]);

        grad.d_rho_s[c] += I[c] * (1.0 - w5) * base;

        // d/dn via ch (direction h), cl (direction l), cv (direction v)
        const double coef_h = I[c] * fr * dd_dch * g1l * g1v / (4.0 * cv);
        const double coef_l = I[c] * fr * d * dg1l_dcl * g1v / (4.0 * cv);
        const double coef_v = I[c] * fr * d * g1l * (dg1v_dcv * cv - g1v) / (4.0 * cv * cv);
        grad.d_n[c][0] += coef_h * h.x + coef_l * l.dir.x + coef_v * v.dir.x;
        grad.d_n[c][1] += coef_h * h.y + coef_l * l.dir.y + coef_v * v.dir.y;
        grad.d_n[c][2] += coef_h * h.z + coef_l * l.dir.z + coef_v * v.dir.z;

        grad.d_alpha[c] += I[c] * fr / (4.0 * cv) *
                           (dd_dalpha * g1l * g1v + d * dg1l_dalpha * g1v + d * g1l * dg1v_dalpha);
    }
    return grad;
}

ImageBuffer render_image(const ParameterMaps& m, const DirectionalLight& l,
                         const ViewSpec& v, const AmbientTerm& a) {
    ImageBuffer out(m.width, m.height, 3);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            std::size_t p = m.pixel(x, y);
            TexelBrdf t;
            t.n = normalize(Vec3{m.normal[3 * p], m.normal[3 * p + 1], m.normal[3 * p + 2]});
            t.rho_d = {m.diffuse[3 * p], m.diffuse[3 * p + 1], m.diffuse[3 * p + 2]};
            t.rho_s = {m.specular[3 * p], m.specular[3 * p + 1], m.specular[3 * p + 2]};
            t.alpha = m.roughness[p];
            Vec3 rad = shade_texel(t, l, v, a);
            out.at(x, y, 0) = static_cast<float>(rad.x);
            out.at(x, y, 1) = static_cast<float>(rad.y);
            out.at(x, y, 2) = static_cast<float>(rad.z);
        }
    }
    return out;
}

DirectionalLight sample_light(Rng& rng, const LightDistribution& d) {
    const double deg = kPi / 180.0;
    double elev = rng.uniform(d.elevation_min_deg * deg, d.elevation_max_deg * deg);
    double azim = rng.uniform(0.0, 2.0 * kPi);
    DirectionalLight light;
    light.dir = {std::cos(elev) * std::cos(azim), std::cos(elev) * std::sin(azim), std::sin(elev)};
    if (rng.chance(d.gray_prob)) {
        double i = rng.uniform(d.intensity_min, d.intensity_max);
        light.intensity = {i, i, i};
    } else {
        double r = rng.uniform(d.intensity_min, d.intensity_max);
        double g = rng.uniform(d.intensity_min, d.intensity_max);
        double b = rng.uniform(d.intensity_min, d.intensity_max);
        light.intensity = {r, g, b};
    }
    return light;
}

DirectionalLight sample_light(std::uint64_t seed, const LightDistribution& d) {
    Rng rng(seed);
    return sample_light(rng, d);
}

} // namespace matxfer
