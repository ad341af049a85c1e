#include "charfac/context_consistency.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace charfac {

namespace {

std::size_t count_marker(const std::string& text) {
    std::size_t n = 0;
    for (auto pos = text.find(kIdentityMarker); pos != std::string::npos;
         pos = text.find(kIdentityMarker, pos + kIdentityMarker.size())) {
        ++n;
    }
    return n;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(PromptCategory c) {
    switch (c) {
        case PromptCategory::Expressions: return "expressions";
        case PromptCategory::Decorations: return "decorations";
        case PromptCategory::Actions: return "actions";
        case PromptCategory::Attributes: return "attributes";
        case PromptCategory::Backgrounds: return "backgrounds";
        case PromptCategory::Unspecified: break;
    }
    return "unspecified";
}

PromptCategory parse_category(const std::string& s) {
    for (auto c : {PromptCategory::Expressions, PromptCategory::Decorations, PromptCategory::Actions,
                   PromptCategory::Attributes, PromptCategory::Backgrounds, PromptCategory::Unspecified}) {
        if (to_string(c) == s) return c;
    }
    throw PromptError("unknown prompt category '" + s + "'");
}

std::string PromptTemplate::with_identity_text(const std::string& replacement) const {
    const auto pos = text.find(kIdentityMarker);
    if (pos == std::string::npos) throw PromptError("template has no " + std::string(kIdentityMarker) + " marker");
    return text.substr(0, pos) + replacement + text.substr(pos + kIdentityMarker.size());
}

std::string PromptTemplate::encoder_text() const {
    return with_identity_text(" " + std::string(kPlaceholderFirst) + " " + std::string(kPlaceholderSecond) + " ");
}

PromptTokens tokenize_template(const PromptTemplate& t, const Tokenizer& tokenizer) {
    PromptTokens out;
    out.ids = tokenizer.encode(t.encoder_text());
    const auto it = std::find(out.ids.begin(), out.ids.end(), tokenizer.placeholder_first());
    if (it == out.ids.end() || it + 1 == out.ids.end() || *(it + 1) != tokenizer.placeholder_second() ||
        std::count(out.ids.begin(), out.ids.end(), tokenizer.placeholder_first()) != 1 ||
        std::count(out.ids.begin(), out.ids.end(), tokenizer.placeholder_second()) != 1) {
        throw PromptError("placeholder tokens not found after tokenization: \"" + t.text + "\"");
    }
    out.placeholder = static_cast<std::size_t>(it - out.ids.begin());
    return out;
}

PromptTemplate make_template(const std::string& text, const Tokenizer& tokenizer, PromptCategory category) {
    const auto n = count_marker(text);
    if (n == 0) throw PromptError("template has no " + std::string(kIdentityMarker) + " placeholder: \"" + text + "\"");
    if (n > 1) {
        throw PromptError("template has " + std::to_string(n) + " placeholders, expected one: \"" + text + "\"");
    }
    if (text.find(kPlaceholderFirst) != std::string::npos || text.find(kPlaceholderSecond) != std::string::npos) {
        throw PromptError("template spells a reserved token literally: \"" + text + "\"");
    }
    PromptTemplate t{text, category};
    const auto tokens = tokenize_template(t, tokenizer);
    if (static_cast<int>(tokens.ids.size()) > tokenizer.context_length()) {
        throw PromptError("template is " + std::to_string(tokens.ids.size()) + " tokens, context holds " +
                          std::to_string(tokenizer.context_length()) + ": \"" + text + "\"");
    }
    return t;
}

double PromptCorpus::positional_diversity() const {
    if (placeholder_positions.size() <= 1) return 0.0;
    double total = 0.0;
    for (const auto& [pos, n] : placeholder_positions) total += static_cast<double>(n);
    double h = 0.0;
    for (const auto& [pos, n] : placeholder_positions) {
        const double p = static_cast<double>(n) / total;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(placeholder_positions.size()));
}

PromptCorpus parse_prompt_corpus(const std::string& text, const Tokenizer& tokenizer, const std::string& origin) {
    PromptCorpus corpus;
    corpus.hash = sha256_hex(text);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        PromptCategory cat = PromptCategory::Unspecified;
        std::string body = trimmed;
        if (const auto tab = trimmed.find('\t'); tab != std::string::npos) {
            try {
                cat = parse_category(trim(trimmed.substr(0, tab)));
            } catch (const PromptError& e) {
                throw PromptError(origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
            body = trim(trimmed.substr(tab + 1));
        }
        try {
            auto t = make_template(body, tokenizer, cat);
            ++corpus.placeholder_positions[tokenize_template(t, tokenizer).placeholder];
            corpus.templates.push_back(std::move(t));
        } catch (const PromptError& e) {
            throw PromptError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (corpus.templates.empty()) throw PromptError(origin + ": prompt corpus is empty");
    return corpus;
}

PromptCorpus load_prompt_corpus(const std::filesystem::path& path, const Tokenizer& tokenizer) {
    if (!std::filesystem::exists(path)) throw Error("prompt corpus not found: " + path.string());
    return parse_prompt_corpus(read_file(path), tokenizer, path.string());
}

Mat substitute_identity(const PromptTokens& tokens, const EmbeddingPair& identity, const FrozenTextModel& text) {
    if (identity.dim() != text.dim()) {
        throw MismatchError("identity width " + std::to_string(identity.dim()) + " does not match encoder dim " +
                            std::to_string(text.dim()));
    }
    Mat words = text.encoder.lookup(tokens.ids);
    const auto p = static_cast<Eigen::Index>(tokens.placeholder);
    words.row(p) = identity.first().transpose();
    words.row(p + 1) = identity.second().transpose();
    return words;
}

Mat encode_text(const std::string& text, const FrozenTextModel& model) {
    const auto ids = model.tokenizer.encode(text);
    if (static_cast<int>(ids.size()) > model.tokenizer.context_length()) {
        throw PromptError("prompt exceeds the encoder context: \"" + text + "\"");
    }
    return model.encoder.transform(model.encoder.lookup(ids));
}

ContextualPair embed_prompt_with_identity(const PromptTemplate& t, const EmbeddingPair& identity,
                                          const FrozenTextModel& text, ContextualTrace* trace) {
    const auto tokens = tokenize_template(t, text.tokenizer);
    const Mat words = substitute_identity(tokens, identity, text);
    ContextualTrace local;
    ContextualTrace& tr = trace ? *trace : local;
    const Mat out = text.encoder.transform(words, tr.encoder);
    tr.placeholder = tokens.placeholder;
    tr.length = words.rows();
    const auto p = static_cast<Eigen::Index>(tokens.placeholder);
    return ContextualPair{EmbeddingPair(Vec(out.row(p).transpose()), Vec(out.row(p + 1).transpose()))};
}

Vec embed_prompt_backward(const FrozenTextModel& text, const ContextualTrace& trace, const Vec& d_contextual) {
    const Eigen::Index d = text.dim();
    if (d_contextual.size() != 2 * d) throw MismatchError("embed_prompt_backward: gradient width mismatch");
    Mat d_out = Mat::Zero(trace.length, d);
    const auto p = static_cast<Eigen::Index>(trace.placeholder);
    d_out.row(p) = d_contextual.head(d).transpose();
    d_out.row(p + 1) = d_contextual.tail(d).transpose();
    const Mat d_words = text.encoder.backward(trace.encoder, d_out);
    Vec g(2 * d);
    g.head(d) = d_words.row(p).transpose();
    g.tail(d) = d_words.row(p + 1).transpose();
    return g;
}

double context_consistent_loss(std::span<const ContextualPair> pairs) {
    const std::size_t n = pairs.size();
    if (n < 2) throw Error("context_consistent_loss: need at least 2 contextual pairs");
    const auto width = pairs[0].values.values.size();
    std::vector<double> terms;
    terms.reserve(n * (n - 1) / 2);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k) {
            if (pairs[k].values.values.size() != width) throw MismatchError("context_consistent_loss: width mismatch");
            terms.push_back((pairs[j].values.values - pairs[k].values.values).squaredNorm());
        }
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    return sum / static_cast<double>(terms.size());
}

std::vector<Vec> context_consistent_loss_grad(std::span<const ContextualPair> pairs) {
    const std::size_t n = pairs.size();
    if (n < 2) throw Error("context_consistent_loss_grad: need at least 2 contextual pairs");
    const double num_pairs = static_cast<double>(n * (n - 1) / 2);
    Vec total = Vec::Zero(pairs[0].values.values.size());
    for (const auto& p : pairs) total += p.values.values;
    std::vector<Vec> grads;
    grads.reserve(n);
    // d/dc_j sum_{a<b} |c_a - c_b|^2 = 2 (n c_j - sum_k c_k).
    for (const auto& p : pairs) grads.push_back((2.0 / num_pairs) * (static_cast<double>(n) * p.values.values - total));
    return grads;
}

}  // namespace charfac
