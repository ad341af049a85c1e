#pragma once

#include "charfac/common.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace charfac {

/// Seeded random source with a serializable state.
///
/// Normal draws use Box-Muller without caching the second variate, so the
/// full state is the engine state alone and a restored Rng continues the
/// exact same stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in the open interval (0, 1).
    double uniform();

    /// Standard normal.
    double normal();

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    Vec normal_vector(Eigen::Index n);

    /// k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    std::string save_state() const;
    void load_state(const std::string& state);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace charfac
