#pragma once

#include "charfac/base_model.hpp"
#include "charfac/diffusion.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/eval_backends.hpp"
#include "charfac/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace charfac {

class EvaluationError : public Error {
public:
    using Error::Error;
};

/// On-disk description of an evaluation grid: (identity, prompt) -> image.
struct GridManifest {
    struct Cell {
        std::string identity;
        std::string prompt;
        std::filesystem::path image;
    };
    std::string anchor_prompt = "a photo of {ID}";
    std::vector<Cell> cells;
    /// Images of the pseudo ground truth set used by the Frechet distance.
    std::vector<std::filesystem::path> reference_images;

    /// Relative image paths are resolved against the manifest's directory.
    static GridManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Images of a complete K x M grid. Identities and prompts are kept in
/// sorted label order, so every metric is independent of insertion order.
class ImageGrid {
public:
    explicit ImageGrid(std::string anchor_prompt = "a photo of {ID}") : anchor_(std::move(anchor_prompt)) {}

    /// Throws on a duplicate cell.
    void add(const std::string& identity, const std::string& prompt, Image image);
    /// Throws EvaluationError unless every identity has every prompt and the
    /// anchor prompt is among them.
    void validate() const;

    const std::string& anchor_prompt() const { return anchor_; }
    std::vector<std::string> identities() const;
    std::vector<std::string> prompts() const;
    const std::map<std::string, Image>& row(const std::string& identity) const;
    const std::map<std::string, std::map<std::string, Image>>& rows() const { return cells_; }
    std::size_t size() const;

    static ImageGrid from_manifest(const GridManifest& m);

private:
    std::string anchor_;
    std::map<std::string, std::map<std::string, Image>> cells_;
};

struct MetricOptions {
    /// Pairwise metrics use at most this many pairs per identity, drawn with
    /// a fixed seed; the default keeps 40-prompt grids (780 pairs) exact.
    std::size_t max_pairs = 1000;
    std::uint64_t seed = 0;
    /// The run fails when more than this fraction of cells has no face.
    double max_face_exclusion = 0.2;
    /// Replaces the identity marker in prompts given to the text embedder.
    std::string neutral_subject = "a person";
};

struct MetricValue {
    double value = 0.0;
    std::size_t count = 0;  // similarities or distances averaged
    std::size_t excluded = 0;
    std::vector<std::string> warnings;
};

MetricValue subject_consistency(const ImageGrid& grid, const ImageTextBackend& backend);
MetricValue identity_consistency(const ImageGrid& grid, const FaceBackend& face, const MetricOptions& opt = {});
MetricValue editability(const ImageGrid& grid, const ImageTextBackend& backend, const MetricOptions& opt = {});
MetricValue face_diversity(const ImageGrid& grid, const FaceBackend& face, const PerceptualBackend& perceptual,
                           const MetricOptions& opt = {});
MetricValue trusted_face_diversity(const ImageGrid& grid, const FaceBackend& face,
                                   const PerceptualBackend& perceptual, const MetricOptions& opt = {});
/// 1 - mean pairwise face similarity across portraits of distinct identities.
MetricValue identity_diversity(std::span<const Image> portraits, const FaceBackend& face,
                               const MetricOptions& opt = {});

/// Frechet distance between Gaussians fitted to the two feature sets.
double frechet_distance(const Vec& mean_a, const Mat& cov_a, const Vec& mean_b, const Mat& cov_b);
MetricValue image_quality_fid(std::span<const Image> a, std::span<const Image> b, const FeatureBackend& features);

struct EvalBackends {
    const ImageTextBackend* image_text = nullptr;
    const FaceBackend* face = nullptr;
    const PerceptualBackend* perceptual = nullptr;
    const FeatureBackend* features = nullptr;
};

struct MetricsReport {
    std::size_t identities = 0;
    std::size_t prompts = 0;
    MetricValue subject_consistency;
    MetricValue identity_consistency;
    MetricValue editability;
    MetricValue face_diversity;
    MetricValue trusted_face_diversity;
    std::optional<MetricValue> image_quality_fid;
    std::optional<MetricValue> identity_diversity;

    /// Flat key/value JSON document.
    std::string to_json() const;
};

/// Every metric over one grid; FID only when reference images are given.
MetricsReport evaluate_grid(const ImageGrid& grid, std::span<const Image> reference, const EvalBackends& backends,
                            const MetricOptions& opt = {});

struct GridRenderOptions {
    SamplerSettings sampler;
    int image_size = 0;
    std::uint64_t base_seed = 0;
};

/// Renders every (identity, prompt) cell into out_dir and returns a
/// manifest with paths relative to out_dir.
GridManifest render_grid(const std::vector<std::pair<std::string, EmbeddingPair>>& identities,
                         const std::vector<std::string>& prompts, const BaseModel& model,
                         const std::filesystem::path& out_dir, const GridRenderOptions& options = {},
                         const std::string& anchor_prompt = "a photo of {ID}");

}  // namespace charfac
