#include "charfac/adam.hpp"

#include "charfac/binary_io.hpp"

#include <cmath>

namespace charfac {

AdamState AdamState::for_params(const MlpParams& p) {
    return {p.zeros_like(), p.zeros_like(), 0};
}

void AdamState::save(BinaryWriter& w) const {
    w.u64(static_cast<std::uint64_t>(steps));
    first_moment.save(w);
    second_moment.save(w);
}

AdamState AdamState::load(BinaryReader& r) {
    AdamState s;
    s.steps = static_cast<std::int64_t>(r.u64());
    s.first_moment = MlpParams::load(r);
    s.second_moment = MlpParams::load(r);
    return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamConfig& cfg) {
    if (params.layers.size() != grads.layers.size() || params.layers.size() != state.first_moment.layers.size()) {
        throw MismatchError("adam_step: parameter/gradient/state shapes differ");
    }
    ++state.steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.steps));
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        update(params.layers[i].weight, grads.layers[i].weight, state.first_moment.layers[i].weight,
               state.second_moment.layers[i].weight);
        update(params.layers[i].bias, grads.layers[i].bias, state.first_moment.layers[i].bias,
               state.second_moment.layers[i].bias);
    }
}

}  // namespace charfac
