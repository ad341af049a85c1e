#pragma once

#include "charfac/diffusion.hpp"
#include "charfac/text_encoder.hpp"
#include "charfac/tokenizer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace charfac {

/// Frozen text side of the base model: tokenizer plus text encoder.
/// Every consumer holds it by const reference; nothing in the toolkit
/// mutates it.
struct FrozenTextModel {
    Tokenizer tokenizer;
    TextEncoder encoder;

    int dim() const { return encoder.dim(); }
};

/// Frozen text-to-image base model.
class BaseModel {
public:
    BaseModel(std::string name, FrozenTextModel text, LatentDiffusion diffusion);

    /// `name@<12 hex of the parameter hash>`; recorded in every artifact
    /// derived from this model.
    const std::string& id() const { return id_; }
    const std::string& name() const { return name_; }
    const FrozenTextModel& text() const { return text_; }
    const LatentDiffusion& diffusion() const { return diffusion_; }
    int dim() const { return text_.dim(); }

    /// Hash over the tokenizer, encoder and diffusion parameters.
    std::string parameter_hash() const;

    void save(const std::filesystem::path& path) const;
    static BaseModel load(const std::filesystem::path& path);

private:
    std::string name_;
    FrozenTextModel text_;
    LatentDiffusion diffusion_;
    std::string id_;
};

struct ToyModelSpec {
    std::string name = "toy-clip";
    RandomEncoderSpec encoder;
    /// Whole-word vocabulary entries beyond the single characters.
    std::vector<std::string> words;
    LatentDiffusion::Config diffusion;
    std::uint64_t seed = 1;
};

/// Vocabulary with the reserved tokens, printable single characters and `words`.
std::vector<std::string> build_vocabulary(const std::vector<std::string>& words);

/// Lowercased alphabetic words appearing in text, in first-seen order.
std::vector<std::string> collect_words(const std::string& text);

/// Deterministic small base model for tests, desk-scale runs and demos.
BaseModel make_toy_base_model(const ToyModelSpec& spec);

}  // namespace charfac
