#pragma once

#include "charfac/common.hpp"

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace charfac {

using TokenId = int;

/// Literal marker that prompt files use for the two identity placeholders.
inline constexpr std::string_view kIdentityMarker = "{ID}";
/// Reserved vocabulary entries standing for the first and second identity tokens.
inline constexpr std::string_view kPlaceholderFirst = "<id1>";
inline constexpr std::string_view kPlaceholderSecond = "<id2>";

/// Frozen tokenizer of the text encoder.
///
/// Lowercases, splits on whitespace and punctuation, then greedily matches
/// the longest vocabulary prefix of each word. Reserved tokens such as
/// `<id1>` are matched verbatim. Characters no vocabulary entry starts with
/// become `<unk>`.
class Tokenizer {
public:
    explicit Tokenizer(std::vector<std::string> vocab, int context_length = 77);

    /// Token ids of text, wrapped in `<bos>` ... `<eos>`.
    std::vector<TokenId> encode(std::string_view text) const;
    /// Token ids of one word, without start/end tokens.
    std::vector<TokenId> encode_word(std::string_view word) const;

    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::string& token(TokenId id) const { return vocab_.at(static_cast<std::size_t>(id)); }
    std::size_t vocab_size() const { return vocab_.size(); }
    int context_length() const { return context_length_; }

    TokenId bos() const { return bos_; }
    TokenId eos() const { return eos_; }
    TokenId unk() const { return unk_; }
    TokenId placeholder_first() const { return id1_; }
    TokenId placeholder_second() const { return id2_; }

private:
    void encode_piece(std::string_view piece, std::vector<TokenId>& out) const;
    TokenId require(std::string_view tok) const;

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> index_;
    std::size_t longest_ = 1;
    int context_length_;
    TokenId bos_, eos_, unk_, id1_, id2_;
};

}  // namespace charfac
