#pragma once

#include "charfac/base_model.hpp"
#include "charfac/checkpoint.hpp"
#include "charfac/diffusion.hpp"
#include "charfac/ide_gan.hpp"
#include "charfac/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace charfac {

class Rng;

/// Draws z ~ N(0, I) and runs the generator. Throws MismatchError when the
/// checkpoint was trained for a different base model or width.
PseudoIdentity sample_identity(const Checkpoint& checkpoint, const BaseModel& model, Rng& rng,
                               std::int64_t created_unix = 0);
PseudoIdentity sample_identity(const Checkpoint& checkpoint, const BaseModel& model, const LatentCode& z,
                               std::int64_t created_unix = 0);

/// (1 - t) z1 + t z2 for t in [0, 1].
LatentCode interpolate(const LatentCode& z1, const LatentCode& z2, double t);

struct RenderRequest {
    EmbeddingPair identity;
    std::string prompt;  // must contain {ID} exactly once
    SamplerSettings sampler;
    int image_size = 0;  // 0 selects the model's native resolution
    std::uint64_t seed = 0;

    /// Throws PromptError or Error on a malformed request.
    void validate(const BaseModel& model) const;
};

/// Deterministic for a fixed request. Never modifies the identity or model.
Image render(const RenderRequest& request, const BaseModel& model);

/// Thrown by story_render; lists every failing prompt by index.
class StoryError : public Error {
public:
    StoryError(const std::string& what, std::vector<std::size_t> failed) : Error(what), failed_(std::move(failed)) {}
    const std::vector<std::size_t>& failed_indices() const { return failed_; }

private:
    std::vector<std::size_t> failed_;
};

struct StoryOptions {
    SamplerSettings sampler;
    int image_size = 0;
    /// Scene i uses base_seed + i unless pinned_seed is set.
    std::uint64_t base_seed = 0;
    std::optional<std::uint64_t> pinned_seed;
};

/// Renders every prompt with the same identity embeddings. All prompts are
/// validated before any rendering starts.
std::vector<Image> story_render(const EmbeddingPair& identity, const std::vector<std::string>& prompts,
                                const BaseModel& model, const StoryOptions& options = {});

/// Versioned binary identity container.
void save_identity(const PseudoIdentity& identity, const std::filesystem::path& path);
/// When `model` is given, refuses files made for another base model.
PseudoIdentity load_identity(const std::filesystem::path& path, const BaseModel* model = nullptr);

}  // namespace charfac
