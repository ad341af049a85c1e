#include "charfac/tokenizer.hpp"

#include <algorithm>
#include <cctype>

namespace charfac {

Tokenizer::Tokenizer(std::vector<std::string> vocab, int context_length)
    : vocab_(std::move(vocab)), context_length_(context_length) {
    if (context_length_ < 4) throw Error("Tokenizer: context length must be at least 4");
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (vocab_[i].empty()) throw FormatError("Tokenizer: empty vocabulary entry");
        if (!index_.emplace(vocab_[i], static_cast<TokenId>(i)).second) {
            throw FormatError("Tokenizer: duplicate vocabulary entry '" + vocab_[i] + "'");
        }
        if (vocab_[i].front() != '<') longest_ = std::max(longest_, vocab_[i].size());
    }
    bos_ = require("<bos>");
    eos_ = require("<eos>");
    unk_ = require("<unk>");
    id1_ = require(kPlaceholderFirst);
    id2_ = require(kPlaceholderSecond);
}

TokenId Tokenizer::require(std::string_view tok) const {
    const auto it = index_.find(std::string(tok));
    if (it == index_.end()) throw FormatError("Tokenizer: vocabulary lacks '" + std::string(tok) + "'");
    return it->second;
}

void Tokenizer::encode_piece(std::string_view piece, std::vector<TokenId>& out) const {
    std::size_t pos = 0;
    while (pos < piece.size()) {
        std::size_t len = std::min(longest_, piece.size() - pos);
        for (; len > 0; --len) {
            const auto it = index_.find(std::string(piece.substr(pos, len)));
            if (it != index_.end() && it->first.front() != '<') {
                out.push_back(it->second);
                break;
            }
        }
        if (len == 0) {
            out.push_back(unk_);
            len = 1;
        }
        pos += len;
    }
}

std::vector<TokenId> Tokenizer::encode_word(std::string_view word) const {
    std::vector<TokenId> out;
    std::string lowered(word);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    encode_piece(lowered, out);
    return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out{bos_};
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (c == '<') {
            const auto close = text.find('>', i);
            if (close != std::string_view::npos) {
                const auto it = index_.find(std::string(text.substr(i, close - i + 1)));
                if (it != index_.end()) {
                    out.push_back(it->second);
                    i = close + 1;
                    continue;
                }
            }
        }
        if (std::ispunct(c)) {
            encode_piece(text.substr(i, 1), out);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
               !std::ispunct(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        const auto ids = encode_word(text.substr(i, j - i));
        out.insert(out.end(), ids.begin(), ids.end());
        i = j;
    }
    out.push_back(eos_);
    return out;
}

}  // namespace charfac
