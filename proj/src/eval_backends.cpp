#include "charfac/eval_backends.hpp"

#include "charfac/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace charfac {

namespace {

Mat luminance(const Image& img) {
    Mat l(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            l(y, x) = (0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2)) / 255.0;
        }
    }
    return l;
}

Mat gradient_x(const Mat& l) {
    Mat g = Mat::Zero(l.rows(), l.cols());
    if (l.cols() > 1) g.leftCols(l.cols() - 1) = l.rightCols(l.cols() - 1) - l.leftCols(l.cols() - 1);
    return g;
}

Mat gradient_y(const Mat& l) {
    Mat g = Mat::Zero(l.rows(), l.cols());
    if (l.rows() > 1) g.topRows(l.rows() - 1) = l.bottomRows(l.rows() - 1) - l.topRows(l.rows() - 1);
    return g;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void require_image(const Image& img, const char* who) {
    if (img.empty() || img.width <= 0 || img.height <= 0) throw Error(std::string(who) + ": empty image");
}

}  // namespace

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw MismatchError("cosine_similarity: length mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

ReferenceImageText::ReferenceImageText(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim <= 0) throw Error("ReferenceImageText: dim must be positive");
    Rng rng(seed);
    constexpr int kDescriptor = 8 * 8 * 3 + 8 * 8;
    projection_.resize(dim, kDescriptor);
    for (Eigen::Index j = 0; j < projection_.cols(); ++j)
        for (Eigen::Index i = 0; i < projection_.rows(); ++i) projection_(i, j) = rng.normal() / std::sqrt(kDescriptor);
}

Vec ReferenceImageText::embed_image(const Image& img) const {
    require_image(img, "ReferenceImageText");
    const Image small = img.resized(8, 8);
    Vec desc(projection_.cols());
    Eigen::Index k = 0;
    for (std::uint8_t v : small.rgb) desc[k++] = v / 255.0 - 0.5;
    const Mat l = luminance(small);
    const Mat gx = gradient_x(l), gy = gradient_y(l);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) desc[k++] = std::hypot(gx(y, x), gy(y, x));
    return projection_ * desc;
}

Vec ReferenceImageText::embed_text(const std::string& text) const {
    Vec out = Vec::Zero(dim_);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        Rng rng(seed_ ^ fnv1a(word));
        out += rng.normal_vector(dim_);
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::tolower(c)));
        else flush();
    }
    flush();
    return out;
}

std::optional<Image> ReferenceFace::detect(const Image& img) const {
    require_image(img, "ReferenceFace");
    const int side = std::max(1, std::min(img.width, img.height) / 2);
    const Image crop = img.crop((img.width - side) / 2, (img.height - side) / 2, side, side);
    const Mat l = luminance(crop);
    const double mean = l.mean();
    const double sd = std::sqrt((l.array() - mean).square().mean());
    if (sd < min_contrast_) return std::nullopt;
    return crop;
}

Vec ReferenceFace::embed(const Image& face) const {
    require_image(face, "ReferenceFace");
    const Mat l = luminance(face.resized(16, 16));
    Vec v = Eigen::Map<const Vec>(l.data(), l.size());
    v.array() -= v.mean();
    const double n = v.norm();
    if (n > 0) v /= n;
    return v;
}

double ReferencePerceptual::distance(const Image& a, const Image& b) const {
    require_image(a, "ReferencePerceptual");
    require_image(b, "ReferencePerceptual");
    double total = 0.0;
    for (int s : {32, 16, 8}) {
        const Mat la = luminance(a.resized(s, s));
        const Mat lb = luminance(b.resized(s, s));
        const double dl = (la - lb).cwiseAbs().mean();
        const double dg = ((gradient_x(la) - gradient_x(lb)).cwiseAbs().mean() +
                           (gradient_y(la) - gradient_y(lb)).cwiseAbs().mean()) /
                          4.0;
        total += 0.5 * (dl + dg);
    }
    return std::clamp(total / 3.0, 0.0, 1.0);
}

Vec ReferenceFeatures::features(const Image& img) const {
    require_image(img, "ReferenceFeatures");
    Vec f(6 + 4 * 4 * 3);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += img.rgb[i * 3 + c] / 255.0;
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += std::pow(img.rgb[i * 3 + c] / 255.0 - mean, 2);
        f[2 * c] = mean;
        f[2 * c + 1] = std::sqrt(ss / static_cast<double>(n));
    }
    const Image layout = img.resized(4, 4);
    for (std::size_t i = 0; i < layout.rgb.size(); ++i) f[6 + static_cast<Eigen::Index>(i)] = layout.rgb[i] / 255.0;
    return f;
}

}  // namespace charfac
