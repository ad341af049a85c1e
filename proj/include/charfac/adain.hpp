#pragma once

#include "charfac/common.hpp"
#include "charfac/embedding_space.hpp"

namespace charfac {

/// Raised when AdaIN receives a constant vector.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

struct AdainTrace {
    Vec standardized;
    double sigma = 0.0;
};

/// Re-standardizes `raw` by its own scalar mean and population standard
/// deviation, then scales and shifts per dimension by the target statistics:
///
///   out[j] = target_std[j] * (raw[j] - mean(raw)) / std(raw) + target_mean[j]
Vec adain(const Vec& raw, const Vec& target_mean, const Vec& target_std, AdainTrace* trace = nullptr);

/// `position` is 1 or 2 and selects which name slot's statistics apply.
Vec adain(const Vec& raw, int position, const EmbeddingStats& stats);

/// Gradient w.r.t. raw given the gradient w.r.t. the output.
Vec adain_backward(const AdainTrace& trace, const Vec& target_std, const Vec& d_out);

}  // namespace charfac
