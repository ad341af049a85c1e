#pragma once

#include "charfac/common.hpp"
#include "charfac/image.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace charfac {

/// Joint image/text embedding space (CLIP-style).
class ImageTextBackend {
public:
    virtual ~ImageTextBackend() = default;
    virtual Vec embed_image(const Image& img) const = 0;
    virtual Vec embed_text(const std::string& text) const = 0;
};

/// Face detection and identity embedding.
class FaceBackend {
public:
    virtual ~FaceBackend() = default;
    /// Face crop, or nothing when no face is found.
    virtual std::optional<Image> detect(const Image& img) const = 0;
    virtual Vec embed(const Image& face) const = 0;
};

/// Learned-perceptual-style distance; 0 for identical inputs.
class PerceptualBackend {
public:
    virtual ~PerceptualBackend() = default;
    virtual double distance(const Image& a, const Image& b) const = 0;
};

/// Feature extractor whose Gaussian statistics feed the Frechet distance.
class FeatureBackend {
public:
    virtual ~FeatureBackend() = default;
    virtual Vec features(const Image& img) const = 0;
};

double cosine_similarity(const Vec& a, const Vec& b);

// Deterministic reference backends. They need no model weights, so absolute
// scores are not comparable with numbers from pretrained networks; orderings
// on controlled fixtures are what they are meant for.

/// Images: random projection of a pooled colour/edge descriptor. Text: sum of
/// per-word random vectors in the same space, seeded by the word's hash.
class ReferenceImageText : public ImageTextBackend {
public:
    explicit ReferenceImageText(int dim = 64, std::uint64_t seed = 7);
    Vec embed_image(const Image& img) const override;
    Vec embed_text(const std::string& text) const override;

private:
    int dim_;
    std::uint64_t seed_;
    Mat projection_;
};

/// Detector: the central square, rejected when its luminance is nearly flat.
/// Embedding: mean-free, unit-norm 16x16 luminance thumbnail.
class ReferenceFace : public FaceBackend {
public:
    explicit ReferenceFace(double min_contrast = 0.02) : min_contrast_(min_contrast) {}
    std::optional<Image> detect(const Image& img) const override;
    Vec embed(const Image& face) const override;

private:
    double min_contrast_;
};

/// Mean absolute difference of normalized luminance and gradient maps at
/// three scales, in [0, 1].
class ReferencePerceptual : public PerceptualBackend {
public:
    double distance(const Image& a, const Image& b) const override;
};

/// Per-channel means, standard deviations and a coarse 4x4 colour layout.
class ReferenceFeatures : public FeatureBackend {
public:
    Vec features(const Image& img) const override;
};

}  // namespace charfac
