#pragma once

#include "charfac/common.hpp"

#include <vector>

namespace charfac {

class Rng;
class BinaryWriter;
class BinaryReader;

struct Linear {
    Mat weight;  // (out x in)
    Vec bias;
};

/// Fully connected stack with a leaky rectifier between layers (none after
/// the last one).
struct MlpParams {
    std::vector<Linear> layers;
    double leaky_slope = 0.2;

    Eigen::Index input_width() const { return layers.front().weight.cols(); }
    Eigen::Index output_width() const { return layers.back().weight.rows(); }
    std::size_t parameter_count() const;
    bool all_finite() const;

    /// Same shapes, all zeros.
    MlpParams zeros_like() const;

    void save(BinaryWriter& w) const;
    static MlpParams load(BinaryReader& r);

    bool operator==(const MlpParams& o) const;
};

struct MlpTrace {
    std::vector<Vec> inputs;    // input of each layer
    std::vector<Vec> pre_acts;  // affine output of each layer
};

/// Layer widths, input first: {in, h1, ..., out}.
/// Hidden layers: normal(0, gain^2 / fan_in) with the leaky-rectifier gain
/// sqrt(2 / (1 + slope^2)); output layer: normal(0, 1 / fan_in). Biases zero.
MlpParams init_mlp(const std::vector<int>& widths, Rng& rng, double leaky_slope = 0.2);

Vec mlp_forward(const MlpParams& p, const Vec& x, MlpTrace* trace = nullptr);

/// Propagates d_out back to the input; accumulates parameter gradients into
/// `grads` when non-null.
Vec mlp_backward(const MlpParams& p, const MlpTrace& trace, const Vec& d_out, MlpParams* grads);

}  // namespace charfac
