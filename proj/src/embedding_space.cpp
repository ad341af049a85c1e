#include "charfac/embedding_space.hpp"

#include "charfac/base_model.hpp"
#include "charfac/binary_io.hpp"
#include "charfac/hashing.hpp"
#include "charfac/rng.hpp"

#include <cmath>
#include <sstream>

namespace charfac {

namespace {

constexpr std::uint32_t kBankVersion = 1;

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

}  // namespace

EmbeddingPair::EmbeddingPair(const Vec& first, const Vec& second) : values(first.size() + second.size()) {
    if (first.size() != second.size()) throw MismatchError("EmbeddingPair: halves differ in length");
    values << first, second;
}

std::vector<NameEntry> parse_name_list(const std::string& text, const std::string& origin) {
    std::vector<NameEntry> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto parts = split_ws(line);
        if (parts.empty()) continue;
        NameEntry e;
        std::vector<std::string> name_parts;
        for (const auto& p : parts) {
            if (const auto eq = p.find('='); eq != std::string::npos) {
                if (eq == 0 || eq + 1 == p.size()) {
                    throw FormatError(origin + ":" + std::to_string(lineno) + ": malformed attribute '" + p + "'");
                }
                e.attributes[p.substr(0, eq)] = p.substr(eq + 1);
            } else {
                name_parts.push_back(p);
            }
        }
        if (name_parts.size() != 2) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": expected 'First Last', got " +
                              std::to_string(name_parts.size()) + " name parts");
        }
        e.first = name_parts[0];
        e.last = name_parts[1];
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<NameEntry> filter_single_token(const std::vector<NameEntry>& names, const Tokenizer& tokenizer,
                                           std::vector<std::string>* rejected) {
    std::vector<NameEntry> kept;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& n = names[i];
        const auto a = tokenizer.encode_word(n.first);
        const auto b = tokenizer.encode_word(n.last);
        const bool ok = a.size() == 1 && b.size() == 1 && a[0] != tokenizer.unk() && b[0] != tokenizer.unk();
        if (ok) {
            kept.push_back(n);
        } else if (rejected) {
            rejected->push_back("entry " + std::to_string(i + 1) + ": " + n.full_name() + " (" +
                                std::to_string(a.size()) + "+" + std::to_string(b.size()) + " tokens)");
        }
    }
    return kept;
}

NameListResult load_name_list(const std::filesystem::path& path, const Tokenizer& tokenizer) {
    if (!std::filesystem::exists(path)) throw Error("name list not found: " + path.string());
    const std::string text = read_file(path);
    NameListResult res;
    res.hash = sha256_hex(text);
    res.entries = filter_single_token(parse_name_list(text, path.string()), tokenizer, &res.rejected);
    if (res.entries.empty()) throw Error(path.string() + ": no usable names");
    return res;
}

CelebEmbeddingBank::CelebEmbeddingBank(std::vector<NameEntry> names, Mat pairs, std::string model_id,
                                       std::string name_list_hash)
    : names_(std::move(names)),
      pairs_(std::move(pairs)),
      model_id_(std::move(model_id)),
      name_list_hash_(std::move(name_list_hash)) {
    if (static_cast<Eigen::Index>(names_.size()) != pairs_.rows()) {
        throw MismatchError("CelebEmbeddingBank: name count differs from embedding rows");
    }
    if (pairs_.cols() == 0 || pairs_.cols() % 2 != 0) {
        throw MismatchError("CelebEmbeddingBank: rows must hold two equal-width embeddings");
    }
    if (names_.size() < 2) throw Error("CelebEmbeddingBank: need at least 2 entries");
    if (!pairs_.allFinite()) throw Error("CelebEmbeddingBank: non-finite embedding");
}

EmbeddingPair CelebEmbeddingBank::pair(std::size_t i) const {
    if (i >= names_.size()) throw Error("CelebEmbeddingBank: index out of range");
    if (auditor_) auditor_(i, names_[i]);
    return EmbeddingPair(Vec(pairs_.row(static_cast<Eigen::Index>(i)).transpose()));
}

EmbeddingPair CelebEmbeddingBank::sample(Rng& rng) const { return pair(rng.index(names_.size())); }

void CelebEmbeddingBank::save(const std::filesystem::path& path) const {
    std::ostringstream os;
    BinaryWriter w(os);
    w.magic("CFEB");
    w.u32(kBankVersion);
    w.str(model_id_);
    w.str(name_list_hash_);
    w.u64(static_cast<std::uint64_t>(dim()));
    w.u64(names_.size());
    for (const auto& n : names_) {
        w.str(n.first);
        w.str(n.last);
        w.u64(n.attributes.size());
        for (const auto& [k, v] : n.attributes) {
            w.str(k);
            w.str(v);
        }
    }
    w.mat(pairs_);
    write_file_atomically(path, os.str());
}

CelebEmbeddingBank CelebEmbeddingBank::load(const std::filesystem::path& path) {
    std::istringstream is(read_file(path));
    BinaryReader r(is, path.string());
    r.expect_magic("CFEB");
    if (const auto v = r.u32(); v != kBankVersion) {
        throw FormatError(path.string() + ": unsupported bank version " + std::to_string(v));
    }
    auto model_id = r.str();
    auto hash = r.str();
    const auto d = r.u64();
    const auto n = r.u64();
    std::vector<NameEntry> names(n);
    for (auto& e : names) {
        e.first = r.str();
        e.last = r.str();
        const auto na = r.u64();
        for (std::uint64_t i = 0; i < na; ++i) {
            auto k = r.str();
            e.attributes[k] = r.str();
        }
    }
    Mat pairs = r.mat();
    if (static_cast<std::uint64_t>(pairs.cols()) != 2 * d) throw FormatError(path.string() + ": d does not match array");
    return CelebEmbeddingBank(std::move(names), std::move(pairs), std::move(model_id), std::move(hash));
}

CelebEmbeddingBank encode_names(const std::vector<NameEntry>& names, const FrozenTextModel& text,
                                std::optional<int> expected_dim, std::string model_id, std::string name_list_hash) {
    const int d = text.dim();
    if (expected_dim && *expected_dim != d) {
        throw MismatchError("encode_names: encoder dim " + std::to_string(d) + " differs from declared " +
                            std::to_string(*expected_dim));
    }
    Mat pairs(static_cast<Eigen::Index>(names.size()), 2 * d);
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto a = text.tokenizer.encode_word(names[i].first);
        const auto b = text.tokenizer.encode_word(names[i].last);
        if (a.size() != 1 || b.size() != 1) {
            throw Error("encode_names: '" + names[i].full_name() + "' is not two single tokens");
        }
        const auto row = static_cast<Eigen::Index>(i);
        pairs.row(row).head(d) = text.encoder.lookup(a[0]).transpose();
        pairs.row(row).tail(d) = text.encoder.lookup(b[0]).transpose();
    }
    return CelebEmbeddingBank(names, std::move(pairs), std::move(model_id), std::move(name_list_hash));
}

EmbeddingStats compute_stats(const CelebEmbeddingBank& bank) {
    const Mat& m = bank.matrix();
    const Eigen::Index d = bank.dim();
    const double n = static_cast<double>(m.rows());
    if (m.rows() < 2) throw Error("compute_stats: need at least 2 entries");
    EmbeddingStats s;
    for (int pos = 0; pos < 2; ++pos) {
        const auto block = m.middleCols(pos * d, d);
        s.mean[pos] = block.colwise().sum().transpose() / n;
        s.std[pos] = Vec(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            const double var = (block.col(j).array() - s.mean[pos][j]).square().sum() / n;
            const double sd = std::sqrt(var);
            if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[pos][j])))) {
                throw Error("compute_stats: zero variance at position " + std::to_string(pos + 1) + ", dimension " +
                            std::to_string(j));
            }
            s.std[pos][j] = sd;
        }
    }
    return s;
}

EmbeddingPair augment_real(const EmbeddingPair& pair, const NoiseConfig& cfg, Rng& rng) {
    if (!pair.values.allFinite()) throw Error("augment_real: non-finite input");
    if (cfg.scale < 0) throw Error("augment_real: negative noise scale");
    if (!cfg.enabled || cfg.scale == 0.0) return pair;
    return EmbeddingPair(Vec(pair.values + cfg.scale * rng.normal_vector(pair.values.size())));
}

}  // namespace charfac
