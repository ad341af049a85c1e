#pragma once

#include "charfac/adam.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/ide_gan.hpp"
#include "charfac/training_config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace charfac {

/// Complete, resumable training snapshot.
struct Checkpoint {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    AdamState generator_opt;
    AdamState discriminator_opt;
    EmbeddingStats stats;
    TrainingConfig config;
    std::int64_t step = 0;
    std::string rng_state;
    std::string base_model_id;
    std::string name_list_hash;
    std::string prompt_corpus_hash;
    std::string activation = "leaky_relu";
    std::string init_scheme = "fan_in_normal";

    Eigen::Index z_dim() const { return generator.z_dim(); }
    Eigen::Index dim() const { return generator.dim(); }

    /// Short content hash of the generator parameters and statistics; stamped
    /// into identities sampled from this checkpoint.
    std::string id() const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace charfac
