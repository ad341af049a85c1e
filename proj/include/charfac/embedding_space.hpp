#pragma once

#include "charfac/common.hpp"
#include "charfac/tokenizer.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace charfac {

class Rng;
struct FrozenTextModel;

/// Two word embeddings standing for a first and last name, stored flat as
/// [v1; v2] (length 2d).
struct EmbeddingPair {
    Vec values;

    EmbeddingPair() = default;
    explicit EmbeddingPair(Vec flat) : values(std::move(flat)) {}
    EmbeddingPair(const Vec& first, const Vec& second);

    Eigen::Index dim() const { return values.size() / 2; }
    auto first() const { return values.head(dim()); }
    auto second() const { return values.tail(dim()); }
    bool operator==(const EmbeddingPair& o) const { return values.size() == o.values.size() && values == o.values; }
};

struct NameEntry {
    std::string first;
    std::string last;
    std::map<std::string, std::string> attributes;

    std::string full_name() const { return first + " " + last; }
    bool operator==(const NameEntry&) const = default;
};

struct NameListResult {
    std::vector<NameEntry> entries;
    /// Lines that parsed but failed the single-token rule, "line N: text".
    std::vector<std::string> rejected;
    /// SHA-256 of the raw file bytes.
    std::string hash;
};

/// Parses "First Last [key=value ...]" lines; `#` starts a comment.
/// Throws FormatError on lines that do not have exactly two name parts.
std::vector<NameEntry> parse_name_list(const std::string& text, const std::string& origin = "<names>");

/// Keeps entries whose first and last names each encode to exactly one token.
std::vector<NameEntry> filter_single_token(const std::vector<NameEntry>& names, const Tokenizer& tokenizer,
                                           std::vector<std::string>* rejected = nullptr);

/// Reads, parses and filters a name list. Throws when the file is missing
/// or nothing survives filtering ("no usable names").
NameListResult load_name_list(const std::filesystem::path& path, const Tokenizer& tokenizer);

/// Ground-truth "real" data: the embedding-layer rows of each name's two tokens.
///
/// Immutable after construction. An optional access auditor observes every
/// entry handed out through `pair`/`sample`.
class CelebEmbeddingBank {
public:
    using Auditor = std::function<void(std::size_t index, const NameEntry& entry)>;

    CelebEmbeddingBank(std::vector<NameEntry> names, Mat pairs, std::string model_id = {},
                       std::string name_list_hash = {});

    std::size_t size() const { return names_.size(); }
    Eigen::Index dim() const { return pairs_.cols() / 2; }
    const std::vector<NameEntry>& names() const { return names_; }
    const std::string& model_id() const { return model_id_; }
    const std::string& name_list_hash() const { return name_list_hash_; }

    EmbeddingPair pair(std::size_t i) const;
    /// Uniformly drawn entry.
    EmbeddingPair sample(Rng& rng) const;
    /// Raw (count x 2d) array, one flat pair per row.
    const Mat& matrix() const { return pairs_; }

    void set_auditor(Auditor auditor) { auditor_ = std::move(auditor); }

    void save(const std::filesystem::path& path) const;
    static CelebEmbeddingBank load(const std::filesystem::path& path);

private:
    std::vector<NameEntry> names_;
    Mat pairs_;
    std::string model_id_;
    std::string name_list_hash_;
    Auditor auditor_;
};

/// Embedding-layer lookup of every name's two tokens (no transformer pass).
/// `expected_dim`, when given, must equal the encoder width.
CelebEmbeddingBank encode_names(const std::vector<NameEntry>& names, const FrozenTextModel& text,
                                std::optional<int> expected_dim = std::nullopt, std::string model_id = {},
                                std::string name_list_hash = {});

/// Per-position, per-dimension statistics over a bank.
struct EmbeddingStats {
    std::array<Vec, 2> mean;
    std::array<Vec, 2> std;

    Eigen::Index dim() const { return mean[0].size(); }
    bool operator==(const EmbeddingStats& o) const {
        return mean[0] == o.mean[0] && mean[1] == o.mean[1] && std[0] == o.std[0] && std[1] == o.std[1];
    }
};

/// Mean and population standard deviation across entries, per position and
/// dimension. Throws on fewer than two entries or a zero-variance dimension.
EmbeddingStats compute_stats(const CelebEmbeddingBank& bank);

struct NoiseConfig {
    double scale = 5e-3;
    bool enabled = true;
};

/// pair + scale * eps, eps ~ N(0, I). Applied to real samples only.
EmbeddingPair augment_real(const EmbeddingPair& pair, const NoiseConfig& cfg, Rng& rng);

}  // namespace charfac
