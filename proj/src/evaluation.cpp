#include "charfac/evaluation.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/inference.hpp"
#include "charfac/rng.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace charfac {

namespace {

using Pair = std::pair<std::size_t, std::size_t>;

std::uint64_t label_seed(std::uint64_t seed, const std::string& label) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// All pairs j < k when they fit under the cap, otherwise a seeded subset
/// kept in index order.
std::vector<Pair> select_pairs(std::size_t n, const MetricOptions& opt, const std::string& label) {
    std::vector<Pair> all;
    all.reserve(n * (n > 0 ? n - 1 : 0) / 2);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) all.emplace_back(j, k);
    if (all.size() <= opt.max_pairs) return all;
    Rng rng(label_seed(opt.seed, label));
    auto picks = rng.sample_without_replacement(all.size(), opt.max_pairs);
    std::sort(picks.begin(), picks.end());
    std::vector<Pair> out;
    out.reserve(picks.size());
    for (auto p : picks) out.push_back(all[p]);
    return out;
}

std::string replace_marker(const std::string& prompt, const std::string& with) {
    const auto pos = prompt.find(kIdentityMarker);
    if (pos == std::string::npos) return prompt;
    return prompt.substr(0, pos) + with + prompt.substr(pos + kIdentityMarker.size());
}

struct FaceEntry {
    Vec embedding;
    Image crop;
};

struct FaceTable {
    std::vector<std::string> identities;
    std::vector<std::vector<FaceEntry>> faces;
    std::size_t total = 0;
    std::size_t excluded = 0;
};

void check_exclusion(std::size_t excluded, std::size_t total, const MetricOptions& opt) {
    if (total > 0 && static_cast<double>(excluded) > opt.max_face_exclusion * static_cast<double>(total)) {
        throw EvaluationError("no face detected in " + std::to_string(excluded) + " of " + std::to_string(total) +
                              " images, above the allowed exclusion rate");
    }
}

FaceTable detect_faces(const ImageGrid& grid, const FaceBackend& face, const MetricOptions& opt) {
    grid.validate();
    FaceTable t;
    for (const auto& [identity, row] : grid.rows()) {
        std::vector<FaceEntry> found;
        for (const auto& [prompt, img] : row) {
            ++t.total;
            auto crop = face.detect(img);
            if (!crop) {
                ++t.excluded;
                continue;
            }
            found.push_back({face.embed(*crop), std::move(*crop)});
        }
        if (found.empty()) throw EvaluationError("no detectable face for identity '" + identity + "'");
        t.identities.push_back(identity);
        t.faces.push_back(std::move(found));
    }
    check_exclusion(t.excluded, t.total, opt);
    return t;
}

template <class PairValue>
MetricValue pairwise_within_identities(const FaceTable& t, const MetricOptions& opt, PairValue value) {
    MetricValue out;
    out.excluded = t.excluded;
    double sum_of_means = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < t.identities.size(); ++i) {
        const auto& faces = t.faces[i];
        if (faces.size() < 2) {
            out.warnings.push_back("identity '" + t.identities[i] + "' has a single detected face and is skipped");
            continue;
        }
        const auto pairs = select_pairs(faces.size(), opt, t.identities[i]);
        double s = 0.0;
        for (const auto& [j, k] : pairs) s += value(faces[j], faces[k]);
        sum_of_means += s / static_cast<double>(pairs.size());
        out.count += pairs.size();
        ++used;
    }
    if (used == 0) throw EvaluationError("no identity has two detected faces");
    out.value = sum_of_means / static_cast<double>(used);
    return out;
}

void require_nonempty(const ImageGrid& grid) {
    if (grid.size() == 0) throw EvaluationError("evaluation grid is empty");
    grid.validate();
}

}  // namespace

GridManifest GridManifest::load(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    try {
        const auto j = nlohmann::json::parse(text);
        GridManifest m;
        if (j.contains("anchor_prompt")) m.anchor_prompt = j.at("anchor_prompt").get<std::string>();
        for (const auto& c : j.at("cells")) {
            m.cells.push_back({c.at("identity").get<std::string>(), c.at("prompt").get<std::string>(),
                               resolve(c.at("image").get<std::string>())});
        }
        if (j.contains("reference_images")) {
            for (const auto& p : j.at("reference_images")) m.reference_images.push_back(resolve(p.get<std::string>()));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void GridManifest::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["anchor_prompt"] = anchor_prompt;
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
        j["cells"].push_back({{"identity", c.identity}, {"prompt", c.prompt}, {"image", c.image.generic_string()}});
    }
    j["reference_images"] = nlohmann::ordered_json::array();
    for (const auto& p : reference_images) j["reference_images"].push_back(p.generic_string());
    write_file_atomically(path, j.dump(2) + "\n");
}

void ImageGrid::add(const std::string& identity, const std::string& prompt, Image image) {
    auto& row = cells_[identity];
    if (!row.emplace(prompt, std::move(image)).second) {
        throw EvaluationError("duplicate grid cell (" + identity + ", " + prompt + ")");
    }
}

void ImageGrid::validate() const {
    if (cells_.empty()) return;
    const auto expected = cells_.begin()->second.size();
    for (const auto& [identity, row] : cells_) {
        if (!row.contains(anchor_)) {
            throw EvaluationError("identity '" + identity + "' lacks the anchor prompt \"" + anchor_ + "\"");
        }
        if (row.size() != expected) {
            throw EvaluationError("grid is incomplete: identity '" + identity + "' has " + std::to_string(row.size()) +
                                  " prompts, expected " + std::to_string(expected));
        }
        auto a = row.begin();
        auto b = cells_.begin()->second.begin();
        for (; a != row.end(); ++a, ++b) {
            if (a->first != b->first) {
                throw EvaluationError("grid is incomplete: identity '" + identity + "' has prompt \"" + a->first +
                                      "\" that others lack");
            }
        }
    }
}

std::vector<std::string> ImageGrid::identities() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : cells_) out.push_back(k);
    return out;
}

std::vector<std::string> ImageGrid::prompts() const {
    std::vector<std::string> out;
    if (!cells_.empty())
        for (const auto& [k, v] : cells_.begin()->second) out.push_back(k);
    return out;
}

const std::map<std::string, Image>& ImageGrid::row(const std::string& identity) const {
    const auto it = cells_.find(identity);
    if (it == cells_.end()) throw EvaluationError("unknown identity '" + identity + "'");
    return it->second;
}

std::size_t ImageGrid::size() const {
    std::size_t n = 0;
    for (const auto& [k, v] : cells_) n += v.size();
    return n;
}

ImageGrid ImageGrid::from_manifest(const GridManifest& m) {
    ImageGrid g(m.anchor_prompt);
    for (const auto& c : m.cells) g.add(c.identity, c.prompt, read_png(c.image));
    g.validate();
    return g;
}

MetricValue subject_consistency(const ImageGrid& grid, const ImageTextBackend& backend) {
    require_nonempty(grid);
    MetricValue out;
    double sum_of_means = 0.0;
    for (const auto& [identity, row] : grid.rows()) {
        if (row.size() < 2) throw EvaluationError("subject consistency needs a prompt besides the anchor");
        const Vec anchor = backend.embed_image(row.at(grid.anchor_prompt()));
        double s = 0.0;
        for (const auto& [prompt, img] : row) {
            if (prompt == grid.anchor_prompt()) continue;
            s += cosine_similarity(anchor, backend.embed_image(img));
        }
        sum_of_means += s / static_cast<double>(row.size() - 1);
        out.count += row.size() - 1;
    }
    out.value = sum_of_means / static_cast<double>(grid.rows().size());
    return out;
}

MetricValue identity_consistency(const ImageGrid& grid, const FaceBackend& face, const MetricOptions& opt) {
    require_nonempty(grid);
    const auto table = detect_faces(grid, face, opt);
    return pairwise_within_identities(table, opt, [](const FaceEntry& a, const FaceEntry& b) {
        return cosine_similarity(a.embedding, b.embedding);
    });
}

MetricValue editability(const ImageGrid& grid, const ImageTextBackend& backend, const MetricOptions& opt) {
    require_nonempty(grid);
    std::map<std::string, Vec> text;
    for (const auto& p : grid.prompts()) text.emplace(p, backend.embed_text(replace_marker(p, opt.neutral_subject)));
    MetricValue out;
    double s = 0.0;
    for (const auto& [identity, row] : grid.rows()) {
        for (const auto& [prompt, img] : row) {
            s += cosine_similarity(backend.embed_image(img), text.at(prompt));
            ++out.count;
        }
    }
    out.value = s / static_cast<double>(out.count);
    return out;
}

MetricValue face_diversity(const ImageGrid& grid, const FaceBackend& face, const PerceptualBackend& perceptual,
                           const MetricOptions& opt) {
    require_nonempty(grid);
    const auto table = detect_faces(grid, face, opt);
    return pairwise_within_identities(table, opt, [&](const FaceEntry& a, const FaceEntry& b) {
        return perceptual.distance(a.crop, b.crop);
    });
}

MetricValue trusted_face_diversity(const ImageGrid& grid, const FaceBackend& face,
                                   const PerceptualBackend& perceptual, const MetricOptions& opt) {
    require_nonempty(grid);
    const auto table = detect_faces(grid, face, opt);
    return pairwise_within_identities(table, opt, [&](const FaceEntry& a, const FaceEntry& b) {
        return cosine_similarity(a.embedding, b.embedding) * perceptual.distance(a.crop, b.crop);
    });
}

MetricValue identity_diversity(std::span<const Image> portraits, const FaceBackend& face, const MetricOptions& opt) {
    if (portraits.size() < 2) throw EvaluationError("identity diversity needs at least two identities");
    std::vector<Vec> emb;
    MetricValue out;
    for (const auto& img : portraits) {
        if (auto crop = face.detect(img)) emb.push_back(face.embed(*crop));
        else ++out.excluded;
    }
    check_exclusion(out.excluded, portraits.size(), opt);
    if (emb.size() < 2) throw EvaluationError("identity diversity: fewer than two detected faces");
    const auto pairs = select_pairs(emb.size(), opt, "identity_diversity");
    double s = 0.0;
    for (const auto& [j, k] : pairs) s += cosine_similarity(emb[j], emb[k]);
    out.count = pairs.size();
    out.value = 1.0 - s / static_cast<double>(pairs.size());
    return out;
}

double frechet_distance(const Vec& mean_a, const Mat& cov_a, const Vec& mean_b, const Mat& cov_b) {
    if (mean_a.size() != mean_b.size() || cov_a.rows() != mean_a.size() || cov_b.rows() != mean_b.size()) {
        throw MismatchError("frechet_distance: dimension mismatch");
    }
    auto sqrt_psd = [](const Mat& m) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
        const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return Mat(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
    };
    const Mat root_a = sqrt_psd(cov_a);
    const double cross = sqrt_psd(root_a * cov_b * root_a).trace();
    const double d = (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    return std::max(0.0, d);
}

MetricValue image_quality_fid(std::span<const Image> a, std::span<const Image> b, const FeatureBackend& features) {
    if (a.size() < 2 || b.size() < 2) throw EvaluationError("FID needs at least two images per set");
    auto fit = [&](std::span<const Image> set) {
        Mat f(static_cast<Eigen::Index>(set.size()), 0);
        for (std::size_t i = 0; i < set.size(); ++i) {
            const Vec v = features.features(set[i]);
            if (f.cols() == 0) f.resize(f.rows(), v.size());
            f.row(static_cast<Eigen::Index>(i)) = v.transpose();
        }
        const Vec mean = f.colwise().mean().transpose();
        const Mat centered = f.rowwise() - mean.transpose();
        const Mat cov = centered.transpose() * centered / static_cast<double>(set.size() - 1);
        return std::pair<Vec, Mat>(mean, cov);
    };
    const auto [ma, ca] = fit(a);
    const auto [mb, cb] = fit(b);
    MetricValue out;
    out.value = frechet_distance(ma, ca, mb, cb);
    out.count = a.size() + b.size();
    return out;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["identities"] = identities;
    j["prompts"] = prompts;
    auto put = [&](const std::string& name, const MetricValue& m) {
        j[name] = m.value;
        j[name + "_count"] = m.count;
        j[name + "_excluded"] = m.excluded;
    };
    put("subject_consistency", subject_consistency);
    put("identity_consistency", identity_consistency);
    put("editability", editability);
    put("face_diversity", face_diversity);
    put("trusted_face_diversity", trusted_face_diversity);
    if (image_quality_fid) put("image_quality_fid", *image_quality_fid);
    if (identity_diversity) put("identity_diversity", *identity_diversity);
    if (identities > 0 && prompts > 0) {
        j["face_exclusion_rate"] =
            static_cast<double>(identity_consistency.excluded) / static_cast<double>(identities * prompts);
    }
    return j.dump(2) + "\n";
}

MetricsReport evaluate_grid(const ImageGrid& grid, std::span<const Image> reference, const EvalBackends& b,
                            const MetricOptions& opt) {
    if (!b.image_text || !b.face || !b.perceptual) throw Error("evaluate_grid: missing backend");
    require_nonempty(grid);
    MetricsReport r;
    r.identities = grid.rows().size();
    r.prompts = grid.prompts().size();
    r.subject_consistency = subject_consistency(grid, *b.image_text);
    r.identity_consistency = identity_consistency(grid, *b.face, opt);
    r.editability = editability(grid, *b.image_text, opt);
    r.face_diversity = face_diversity(grid, *b.face, *b.perceptual, opt);
    r.trusted_face_diversity = trusted_face_diversity(grid, *b.face, *b.perceptual, opt);
    if (!reference.empty()) {
        if (!b.features) throw Error("evaluate_grid: FID needs a feature backend");
        std::vector<Image> generated;
        for (const auto& [identity, row] : grid.rows())
            for (const auto& [prompt, img] : row) generated.push_back(img);
        r.image_quality_fid = image_quality_fid(generated, reference, *b.features);
    }
    if (r.identities >= 2) {
        std::vector<Image> portraits;
        for (const auto& [identity, row] : grid.rows()) portraits.push_back(row.at(grid.anchor_prompt()));
        r.identity_diversity = identity_diversity(portraits, *b.face, opt);
    }
    return r;
}

GridManifest render_grid(const std::vector<std::pair<std::string, EmbeddingPair>>& identities,
                         const std::vector<std::string>& prompts, const BaseModel& model,
                         const std::filesystem::path& out_dir, const GridRenderOptions& options,
                         const std::string& anchor_prompt) {
    if (identities.empty() || prompts.empty()) throw EvaluationError("render_grid: no identities or prompts");
    if (std::find(prompts.begin(), prompts.end(), anchor_prompt) == prompts.end()) {
        throw EvaluationError("render_grid: prompt list lacks the anchor prompt \"" + anchor_prompt + "\"");
    }
    std::filesystem::create_directories(out_dir);
    GridManifest m;
    m.anchor_prompt = anchor_prompt;
    for (std::size_t i = 0; i < identities.size(); ++i) {
        for (std::size_t j = 0; j < prompts.size(); ++j) {
            RenderRequest r;
            r.identity = identities[i].second;
            r.prompt = prompts[j];
            r.sampler = options.sampler;
            r.image_size = options.image_size;
            r.seed = options.base_seed + i * prompts.size() + j;
            const std::string file = "cell_" + std::to_string(i) + "_" + std::to_string(j) + ".png";
            write_png(render(r, model), out_dir / file);
            m.cells.push_back({identities[i].first, prompts[j], file});
        }
    }
    return m;
}

}  // namespace charfac
