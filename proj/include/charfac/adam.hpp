#pragma once

#include "charfac/mlp.hpp"

#include <cstdint>

namespace charfac {

struct AdamConfig {
    double learning_rate = 5e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates shaped like the parameters they track.
struct AdamState {
    MlpParams first_moment;
    MlpParams second_moment;
    std::int64_t steps = 0;

    static AdamState for_params(const MlpParams& p);
    void save(BinaryWriter& w) const;
    static AdamState load(BinaryReader& r);
    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update, in place.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace charfac
