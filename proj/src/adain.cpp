#include "charfac/adain.hpp"

#include <cmath>
#include <limits>

namespace charfac {

Vec adain(const Vec& raw, const Vec& target_mean, const Vec& target_std, AdainTrace* trace) {
    const Eigen::Index d = raw.size();
    if (d == 0 || target_mean.size() != d || target_std.size() != d) {
        throw MismatchError("adain: raw vector and statistics differ in length");
    }
    if (!raw.allFinite()) throw Error("adain: non-finite input");
    const double mu = raw.mean();
    const Vec centered = raw.array() - mu;
    const double sigma = std::sqrt(centered.squaredNorm() / static_cast<double>(d));
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * raw.cwiseAbs().maxCoeff();
    if (!(sigma > floor) || sigma == 0.0) {
        throw DegenerateInputError("adain: zero-variance input (constant generator output)");
    }
    Vec standardized = centered / sigma;
    Vec out = target_std.cwiseProduct(standardized) + target_mean;
    if (trace) {
        trace->standardized = std::move(standardized);
        trace->sigma = sigma;
    }
    return out;
}

Vec adain(const Vec& raw, int position, const EmbeddingStats& stats) {
    if (position != 1 && position != 2) throw Error("adain: position must be 1 or 2");
    const auto i = static_cast<std::size_t>(position - 1);
    return adain(raw, stats.mean[i], stats.std[i]);
}

Vec adain_backward(const AdainTrace& trace, const Vec& target_std, const Vec& d_out) {
    const auto& xhat = trace.standardized;
    const double n = static_cast<double>(xhat.size());
    const Vec d_hat = d_out.cwiseProduct(target_std);
    const double m1 = d_hat.sum() / n;
    const double m2 = d_hat.dot(xhat) / n;
    return (d_hat.array() - m1 - xhat.array() * m2) / trace.sigma;
}

}  // namespace charfac
