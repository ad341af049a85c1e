#pragma once

#include "charfac/base_model.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/text_encoder.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace charfac {

class Rng;

/// Raised for templates that break the placeholder or length rules.
class PromptError : public Error {
public:
    using Error::Error;
};

enum class PromptCategory { Unspecified, Expressions, Decorations, Actions, Attributes, Backgrounds };

std::string to_string(PromptCategory c);
PromptCategory parse_category(const std::string& s);

/// A prompt containing the identity marker `{ID}` exactly once.
struct PromptTemplate {
    std::string text;
    PromptCategory category = PromptCategory::Unspecified;

    /// Text with `{ID}` rewritten to the two reserved placeholder tokens.
    std::string encoder_text() const;
    /// Text with `{ID}` rewritten to `replacement`.
    std::string with_identity_text(const std::string& replacement) const;
};

/// Tokenized prompt; `placeholder` indexes the first of the two reserved tokens.
struct PromptTokens {
    std::vector<TokenId> ids;
    std::size_t placeholder = 0;
};

/// Validates a template against the tokenizer: one marker, adjacent
/// placeholder tokens after tokenization, and length within the context.
PromptTemplate make_template(const std::string& text, const Tokenizer& tokenizer,
                             PromptCategory category = PromptCategory::Unspecified);

PromptTokens tokenize_template(const PromptTemplate& t, const Tokenizer& tokenizer);

struct PromptCorpus {
    std::vector<PromptTemplate> templates;
    /// Histogram of the placeholder token index across templates.
    std::map<std::size_t, std::size_t> placeholder_positions;
    std::string hash;

    std::size_t size() const { return templates.size(); }
    /// Normalized entropy of `placeholder_positions` in [0, 1]; 1 means
    /// every observed position is equally frequent.
    double positional_diversity() const;
};

/// One template per line, optionally prefixed by `category<TAB>`.
/// Blank lines and lines starting with `#` are skipped. Throws PromptError
/// naming the first offending line.
PromptCorpus parse_prompt_corpus(const std::string& text, const Tokenizer& tokenizer,
                                 const std::string& origin = "<prompts>");
PromptCorpus load_prompt_corpus(const std::filesystem::path& path, const Tokenizer& tokenizer);

/// Embedding-layer lookup of the prompt with the placeholder rows replaced
/// by the identity's two embeddings. Shared by training and rendering.
Mat substitute_identity(const PromptTokens& tokens, const EmbeddingPair& identity, const FrozenTextModel& text);

/// Contextual embeddings of a plain prompt (no placeholder handling).
Mat encode_text(const std::string& text, const FrozenTextModel& model);

/// Transformer outputs at the two placeholder positions.
struct ContextualPair {
    EmbeddingPair values;
};

struct ContextualTrace {
    EncoderTrace encoder;
    std::size_t placeholder = 0;
    Eigen::Index length = 0;
};

ContextualPair embed_prompt_with_identity(const PromptTemplate& t, const EmbeddingPair& identity,
                                          const FrozenTextModel& text, ContextualTrace* trace = nullptr);

/// d(loss)/d(identity embeddings) from d(loss)/d(contextual pair).
Vec embed_prompt_backward(const FrozenTextModel& text, const ContextualTrace& trace, const Vec& d_contextual);

/// Mean squared L2 distance over all unordered pairs of the flattened
/// contextual pairs. The pair terms are summed in sorted order, which makes
/// the result bit-identical under any permutation of the inputs.
double context_consistent_loss(std::span<const ContextualPair> pairs);

/// Gradient of the loss w.r.t. each flattened contextual pair.
std::vector<Vec> context_consistent_loss_grad(std::span<const ContextualPair> pairs);

}  // namespace charfac
