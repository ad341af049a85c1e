#pragma once

#include "charfac/adam.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/ide_gan.hpp"
#include "charfac/kv_config.hpp"

#include <cstdint>
#include <filesystem>

namespace charfac {

/// Every hyperparameter of the objective and optimizer.
struct TrainingConfig {
    double lambda_adv = 1.0;  // weight of the adversarial term
    double lambda_con = 1.0;  // weight of the context-consistent term
    std::int64_t steps = 10000;
    int batch_size = 1;
    AdamConfig adam;  // lr 5e-5, betas (0.5, 0.999)
    int prompts_per_step = 8;
    NoiseConfig noise;
    GanShape shape;  // z_dim 64, G 64-2048-2d, D 2d-512-256-1
    std::uint64_t seed = 0;
    GeneratorLossForm generator_loss = GeneratorLossForm::NonSaturating;
    std::int64_t checkpoint_every = 1000;  // 0 disables intermediate checkpoints

    /// Throws Error on out-of-range values.
    void validate() const;

    /// Keys missing from `kv` keep their defaults; unknown keys are an error.
    static TrainingConfig from_kv(const KeyValueConfig& kv);
    static TrainingConfig load(const std::filesystem::path& path);
    KeyValueConfig to_kv() const;
};

}  // namespace charfac
