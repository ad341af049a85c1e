#pragma once

#include "charfac/base_model.hpp"
#include "charfac/checkpoint.hpp"
#include "charfac/context_consistency.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/ide_gan.hpp"
#include "charfac/rng.hpp"
#include "charfac/training_config.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace charfac {

struct TrainingLogRecord {
    std::int64_t step = 0;
    double loss_d = 0.0;
    double loss_g_adv = 0.0;
    double loss_con = 0.0;
    double d_real = 0.0;
    double d_fake = 0.0;
    double wall_ms = 0.0;

    /// One JSON object, doubles printed round-trippable.
    std::string to_json_line() const;
    static TrainingLogRecord from_json_line(const std::string& line);
    /// Equality on every field except wall-clock time.
    bool same_values(const TrainingLogRecord& o) const;
    bool all_finite() const;
};

/// Raised when a step produces a non-finite value; carries the record.
class TrainingAborted : public Error {
public:
    TrainingAborted(const std::string& what, TrainingLogRecord record) : Error(what), record_(record) {}
    const TrainingLogRecord& record() const { return record_; }

private:
    TrainingLogRecord record_;
};

/// Everything a training run mutates, plus the metadata it stamps.
struct TrainingState {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    AdamState generator_opt;
    AdamState discriminator_opt;
    EmbeddingStats stats;
    TrainingConfig config;
    Rng rng;
    std::int64_t step = 0;
    std::string base_model_id;
    std::string name_list_hash;
    std::string prompt_corpus_hash;

    Checkpoint to_checkpoint() const;
    static TrainingState from_checkpoint(const Checkpoint& c);
};

/// Seeds the networks from config.seed and computes stats from the bank.
TrainingState init_training(const TrainingConfig& config, const CelebEmbeddingBank& bank,
                            const std::string& base_model_id = {}, const std::string& prompt_corpus_hash = {});

struct DiscriminatorStepResult {
    double loss = 0.0;
    double d_real = 0.0;
    double d_fake = 0.0;
};

/// One discriminator update on (real, detached fake).
DiscriminatorStepResult discriminator_update(TrainingState& state, const EmbeddingPair& real, const EmbeddingPair& fake);

struct GeneratorStepResult {
    double loss_adv = 0.0;
    double loss_con = 0.0;
};

/// One generator update on lambda_adv * loss_G + lambda_con * loss_con for
/// latent z, using the given templates for the consistency term.
GeneratorStepResult generator_update(TrainingState& state, const LatentCode& z,
                                     std::span<const PromptTemplate> templates, const FrozenTextModel& text);

/// Draws z, a real sample with fresh noise and N prompts, then runs one D
/// update followed by one G update. Only G, D and their optimizers change.
TrainingLogRecord training_step(TrainingState& state, const CelebEmbeddingBank& bank, const PromptCorpus& corpus,
                                const FrozenTextModel& text);

struct TrainOptions {
    /// Receives checkpoints and train_log.jsonl; empty disables file output.
    std::filesystem::path out_dir;
    std::function<void(const TrainingLogRecord&)> on_record;
};

struct TrainResult {
    Checkpoint final_checkpoint;
    std::vector<TrainingLogRecord> log;
};

/// Runs steps until state.step reaches config.steps. Resuming a state built
/// from a checkpoint continues the exact same stream of updates.
TrainResult train(TrainingState& state, const CelebEmbeddingBank& bank, const PromptCorpus& corpus,
                  const FrozenTextModel& text, const TrainOptions& options = {});

/// Partitions names by the value of `attribute`; throws naming the first
/// entry that lacks it.
std::map<std::string, std::vector<NameEntry>> stratified_split(const std::vector<NameEntry>& names,
                                                               const std::string& attribute);

}  // namespace charfac
