#include "charfac/base_model.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/hashing.hpp"
#include "charfac/rng.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace charfac {

namespace {
constexpr std::uint32_t kBaseModelVersion = 1;
}

BaseModel::BaseModel(std::string name, FrozenTextModel text, LatentDiffusion diffusion)
    : name_(std::move(name)), text_(std::move(text)), diffusion_(std::move(diffusion)) {
    if (diffusion_.cond_dim() != text_.dim()) {
        throw MismatchError("BaseModel: diffusion conditioning width differs from text encoder dim");
    }
    if (text_.encoder.vocab_size() != static_cast<Eigen::Index>(text_.tokenizer.vocab_size())) {
        throw MismatchError("BaseModel: tokenizer and embedding table sizes differ");
    }
    if (text_.tokenizer.context_length() > text_.encoder.config().max_positions) {
        throw MismatchError("BaseModel: tokenizer context exceeds encoder positions");
    }
    id_ = name_ + "@" + parameter_hash().substr(0, 12);
}

std::string BaseModel::parameter_hash() const {
    Sha256 h;
    for (const auto& tok : text_.tokenizer.vocab()) h.update(tok).update(std::string_view("\n", 1));
    h.update(text_.encoder.parameter_hash());
    h.update(diffusion_.parameter_hash());
    return h.hex_digest();
}

void BaseModel::save(const std::filesystem::path& path) const {
    std::ostringstream os;
    BinaryWriter w(os);
    w.magic("CFBM");
    w.u32(kBaseModelVersion);
    w.str(name_);
    w.u32(static_cast<std::uint32_t>(text_.tokenizer.context_length()));
    w.u64(text_.tokenizer.vocab_size());
    for (const auto& tok : text_.tokenizer.vocab()) w.str(tok);
    text_.encoder.save(w);
    diffusion_.save(w);
    write_file_atomically(path, os.str());
}

BaseModel BaseModel::load(const std::filesystem::path& path) {
    std::istringstream is(read_file(path));
    BinaryReader r(is, path.string());
    r.expect_magic("CFBM");
    if (const auto v = r.u32(); v != kBaseModelVersion) {
        throw FormatError(path.string() + ": unsupported base model version " + std::to_string(v));
    }
    auto name = r.str();
    const int ctx = static_cast<int>(r.u32());
    const auto n = r.u64();
    std::vector<std::string> vocab;
    vocab.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) vocab.push_back(r.str());
    Tokenizer tok(std::move(vocab), ctx);
    TextEncoder enc = TextEncoder::load(r);
    LatentDiffusion diff = LatentDiffusion::load(r);
    return BaseModel(std::move(name), FrozenTextModel{std::move(tok), std::move(enc)}, std::move(diff));
}

std::vector<std::string> build_vocabulary(const std::vector<std::string>& words) {
    std::vector<std::string> vocab = {"<bos>", "<eos>", "<unk>", std::string(kPlaceholderFirst),
                                      std::string(kPlaceholderSecond)};
    std::set<std::string> seen(vocab.begin(), vocab.end());
    for (int c = 33; c < 127; ++c) {
        if (std::isupper(c)) continue;
        std::string s(1, static_cast<char>(c));
        if (seen.insert(s).second) vocab.push_back(s);
    }
    for (const auto& w : words) {
        if (w.empty() || w.front() == '<') continue;
        if (seen.insert(w).second) vocab.push_back(w);
    }
    return vocab;
}

std::vector<std::string> collect_words(const std::string& text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::string cur;
    auto flush = [&] {
        if (cur.size() > 1 && seen.insert(cur).second) out.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

BaseModel make_toy_base_model(const ToyModelSpec& spec) {
    auto vocab = build_vocabulary(spec.words);
    const auto vocab_size = static_cast<Eigen::Index>(vocab.size());
    TextEncoder enc = make_random_encoder(spec.encoder, vocab_size, spec.seed);
    Tokenizer tok(std::move(vocab), spec.encoder.config.max_positions);

    const auto& dc = spec.diffusion;
    const Eigen::Index latent = static_cast<Eigen::Index>(dc.latent_channels) * dc.latent_size * dc.latent_size;
    const int d = spec.encoder.config.dim;
    Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    Mat proj(latent, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < latent; ++i) proj(i, j) = rng.normal() * 2.0 / std::sqrt(static_cast<double>(d));
    Vec bias = Vec::Zero(latent);
    Mat mix(3, dc.latent_channels);
    for (Eigen::Index j = 0; j < mix.cols(); ++j)
        for (Eigen::Index i = 0; i < 3; ++i) mix(i, j) = rng.normal();
    Vec mix_bias = Vec::Zero(3);
    LatentDiffusion diff(dc, std::move(proj), std::move(bias), std::move(mix), std::move(mix_bias));
    return BaseModel(spec.name, FrozenTextModel{std::move(tok), std::move(enc)}, std::move(diff));
}

}  // namespace charfac
