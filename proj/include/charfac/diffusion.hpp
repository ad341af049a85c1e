#pragma once

#include "charfac/common.hpp"
#include "charfac/image.hpp"

#include <cstdint>
#include <string>

namespace charfac {

class BinaryWriter;
class BinaryReader;

struct SamplerSettings {
    double guidance_scale = 8.5;
    int steps = 50;
};

/// Noise-schedule constants of a DDPM-trained latent denoiser.
struct NoiseSchedule {
    int train_steps = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;

    /// Cumulative alpha products, scaled-linear betas.
    Vec alphas_cumprod() const;
};

/// Frozen latent diffusion backbone: a conditional noise predictor plus a
/// latent-to-pixel decoder. Sampling is deterministic DDIM (eta = 0) with
/// classifier-free guidance.
///
/// The bundled backbone is a closed-form stand-in: its noise prediction is
/// exact for a conditional target latent computed from the pooled contextual
/// embeddings, so the sampler, guidance and decoding paths are real while the
/// weights stay small.
class LatentDiffusion {
public:
    struct Config {
        int latent_channels = 4;
        int latent_size = 8;
        int image_size = 64;
        NoiseSchedule schedule;
    };

    LatentDiffusion(Config config, Mat cond_projection, Vec cond_bias, Mat decoder_mix, Vec decoder_bias);

    const Config& config() const { return config_; }
    int native_size() const { return config_.image_size; }
    Eigen::Index latent_dim() const;
    Eigen::Index cond_dim() const { return cond_projection_.cols(); }

    /// Noise prediction for latent x_t at cumulative alpha `alpha_bar`.
    Vec predict_noise(const Vec& x_t, double alpha_bar, const Mat& context) const;

    /// Runs the guided sampler from seeded Gaussian noise and decodes.
    Image generate(const Mat& cond, const Mat& uncond, const SamplerSettings& settings, std::uint64_t seed) const;

    Image decode(const Vec& latent) const;

    std::string parameter_hash() const;
    void save(BinaryWriter& w) const;
    static LatentDiffusion load(BinaryReader& r);

private:
    Vec target_latent(const Mat& context) const;

    Config config_;
    Mat cond_projection_;  // (latent_dim x d)
    Vec cond_bias_;
    Mat decoder_mix_;  // (3 x latent_channels)
    Vec decoder_bias_;
};

}  // namespace charfac
