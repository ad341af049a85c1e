#include "charfac/diffusion.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/hashing.hpp"
#include "charfac/rng.hpp"

#include <algorithm>
#include <cmath>

namespace charfac {

namespace {
constexpr std::uint32_t kDiffusionVersion = 1;
// Per-dimension spread of clean latents around the conditioned target.
constexpr double kLatentSpread = 0.5;
}

Vec NoiseSchedule::alphas_cumprod() const {
    Vec out(train_steps);
    const double a = std::sqrt(beta_start);
    const double b = std::sqrt(beta_end);
    double prod = 1.0;
    for (int i = 0; i < train_steps; ++i) {
        const double s = train_steps == 1 ? a : a + (b - a) * i / (train_steps - 1);
        prod *= 1.0 - s * s;
        out[i] = prod;
    }
    return out;
}

LatentDiffusion::LatentDiffusion(Config config, Mat cond_projection, Vec cond_bias, Mat decoder_mix,
                                 Vec decoder_bias)
    : config_(config),
      cond_projection_(std::move(cond_projection)),
      cond_bias_(std::move(cond_bias)),
      decoder_mix_(std::move(decoder_mix)),
      decoder_bias_(std::move(decoder_bias)) {
    if (config_.latent_channels <= 0 || config_.latent_size <= 0 || config_.image_size < config_.latent_size) {
        throw FormatError("LatentDiffusion: invalid geometry");
    }
    if (cond_projection_.rows() != latent_dim() || cond_bias_.size() != latent_dim()) {
        throw MismatchError("LatentDiffusion: conditioning projection does not match latent size");
    }
    if (decoder_mix_.rows() != 3 || decoder_mix_.cols() != config_.latent_channels || decoder_bias_.size() != 3) {
        throw MismatchError("LatentDiffusion: decoder shape mismatch");
    }
}

Eigen::Index LatentDiffusion::latent_dim() const {
    return static_cast<Eigen::Index>(config_.latent_channels) * config_.latent_size * config_.latent_size;
}

Vec LatentDiffusion::target_latent(const Mat& context) const {
    if (context.cols() != cond_dim()) throw MismatchError("LatentDiffusion: context width does not match");
    const Vec pooled = context.colwise().mean().transpose();
    return (cond_projection_ * pooled + cond_bias_).array().tanh();
}

Vec LatentDiffusion::predict_noise(const Vec& x_t, double alpha_bar, const Mat& context) const {
    // Exact posterior mean of x0 under a Gaussian prior centred on the target,
    // so the sampler keeps the seed's noise instead of collapsing onto the mean.
    const Vec m = target_latent(context);
    const double s2 = kLatentSpread * kLatentSpread;
    const double gain = std::sqrt(alpha_bar) * s2 / (alpha_bar * s2 + 1.0 - alpha_bar);
    const Vec x0 = m + gain * (x_t - std::sqrt(alpha_bar) * m);
    return (x_t - std::sqrt(alpha_bar) * x0) / std::sqrt(1.0 - alpha_bar);
}

Image LatentDiffusion::generate(const Mat& cond, const Mat& uncond, const SamplerSettings& settings,
                                std::uint64_t seed) const {
    if (settings.steps <= 0 || settings.steps > config_.schedule.train_steps) {
        throw Error("LatentDiffusion: sampler steps out of range");
    }
    if (!(settings.guidance_scale >= 1.0)) throw Error("LatentDiffusion: guidance scale must be >= 1");
    const Vec alphas = config_.schedule.alphas_cumprod();
    const int stride = config_.schedule.train_steps / settings.steps;
    Rng rng(seed);
    Vec x = rng.normal_vector(latent_dim());
    for (int i = settings.steps - 1; i >= 0; --i) {
        const int t = i * stride + 1 < config_.schedule.train_steps ? i * stride + 1 : i * stride;
        const double a_t = alphas[t];
        const double a_prev = i > 0 ? alphas[(i - 1) * stride + 1] : 1.0;
        const Vec eps_u = predict_noise(x, a_t, uncond);
        const Vec eps_c = predict_noise(x, a_t, cond);
        const Vec eps = eps_u + settings.guidance_scale * (eps_c - eps_u);
        const Vec x0 = (x - std::sqrt(1.0 - a_t) * eps) / std::sqrt(a_t);
        x = std::sqrt(a_prev) * x0 + std::sqrt(1.0 - a_prev) * eps;
    }
    return decode(x);
}

Image LatentDiffusion::decode(const Vec& latent) const {
    if (latent.size() != latent_dim()) throw MismatchError("LatentDiffusion::decode: latent size mismatch");
    const int ls = config_.latent_size;
    const int is = config_.image_size;
    const int lc = config_.latent_channels;
    Image img(is, is);
    Vec feat(lc);
    for (int y = 0; y < is; ++y) {
        // Bilinear sample at pixel centers.
        const double fy = std::clamp((y + 0.5) * ls / is - 0.5, 0.0, ls - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, ls - 1);
        const double wy = fy - y0;
        for (int x = 0; x < is; ++x) {
            const double fx = std::clamp((x + 0.5) * ls / is - 0.5, 0.0, ls - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, ls - 1);
            const double wx = fx - x0;
            for (int c = 0; c < lc; ++c) {
                auto at = [&](int yy, int xx) { return latent[(c * ls + yy) * ls + xx]; };
                feat[c] = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
                          wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
            }
            const Vec rgb = decoder_mix_ * feat + decoder_bias_;
            for (int c = 0; c < 3; ++c) {
                const double s = 1.0 / (1.0 + std::exp(-rgb[c]));
                img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(255.0 * s));
            }
        }
    }
    return img;
}

std::string LatentDiffusion::parameter_hash() const {
    Sha256 h;
    h.update(cond_projection_).update(cond_bias_).update(decoder_mix_).update(decoder_bias_);
    return h.hex_digest();
}

void LatentDiffusion::save(BinaryWriter& w) const {
    w.magic("CFLD");
    w.u32(kDiffusionVersion);
    w.u32(static_cast<std::uint32_t>(config_.latent_channels));
    w.u32(static_cast<std::uint32_t>(config_.latent_size));
    w.u32(static_cast<std::uint32_t>(config_.image_size));
    w.u32(static_cast<std::uint32_t>(config_.schedule.train_steps));
    w.f64(config_.schedule.beta_start);
    w.f64(config_.schedule.beta_end);
    w.mat(cond_projection_);
    w.vec(cond_bias_);
    w.mat(decoder_mix_);
    w.vec(decoder_bias_);
}

LatentDiffusion LatentDiffusion::load(BinaryReader& r) {
    r.expect_magic("CFLD");
    if (const auto v = r.u32(); v != kDiffusionVersion) {
        throw FormatError("latent diffusion: unsupported version " + std::to_string(v));
    }
    Config c;
    c.latent_channels = static_cast<int>(r.u32());
    c.latent_size = static_cast<int>(r.u32());
    c.image_size = static_cast<int>(r.u32());
    c.schedule.train_steps = static_cast<int>(r.u32());
    c.schedule.beta_start = r.f64();
    c.schedule.beta_end = r.f64();
    Mat proj = r.mat();
    Vec bias = r.vec();
    Mat mix = r.mat();
    Vec mix_bias = r.vec();
    return LatentDiffusion(c, std::move(proj), std::move(bias), std::move(mix), std::move(mix_bias));
}

}  // namespace charfac
