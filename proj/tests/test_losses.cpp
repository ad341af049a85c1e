#include "doctest.h"

#include "oracles.hpp"

#include "charfac/context_consistency.hpp"
#include "charfac/ide_gan.hpp"
#include "charfac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace charfac;
using namespace charfac::testing;

namespace {

std::vector<ContextualPair> random_pairs(Rng& rng, int n, int width) {
    std::vector<ContextualPair> out;
    for (int i = 0; i < n; ++i) out.push_back({EmbeddingPair(Vec(rng.normal_vector(width)))});
    return out;
}

// Entries are multiples of 1/8 in [-4, 4), so every sum of squares stays exact.
std::vector<ContextualPair> dyadic_pairs(Rng& rng, int n, int width) {
    std::vector<ContextualPair> out;
    for (int i = 0; i < n; ++i) {
        Vec v(width);
        for (int e = 0; e < width; ++e) v[e] = (static_cast<double>(rng.index(64)) - 32.0) / 8.0;
        out.push_back({EmbeddingPair(v)});
    }
    return out;
}

std::vector<std::vector<double>> as_std(const std::vector<ContextualPair>& pairs) {
    std::vector<std::vector<double>> out;
    for (const auto& p : pairs) out.push_back(to_std(p.values.values));
    return out;
}

std::vector<ContextualPair> shifted(std::vector<ContextualPair> pairs, const Vec& t) {
    for (auto& p : pairs) p.values.values += t;
    return pairs;
}

std::vector<ContextualPair> scaled(std::vector<ContextualPair> pairs, double c) {
    for (auto& p : pairs) p.values.values *= c;
    return pairs;
}

}  // namespace

TEST_CASE("context loss matches the brute-force oracle") {
    Rng rng(1);
    for (int n : {2, 3, 8, 13}) {
        const auto pairs = random_pairs(rng, n, 32);
        CHECK(context_consistent_loss(pairs) == doctest::Approx(context_loss_oracle(as_std(pairs))).epsilon(1e-13));
    }
}

TEST_CASE("context loss hand cases") {
    Vec a = Vec::Zero(4), b = Vec::Zero(4);
    b[0] = 2.0;
    const std::vector<ContextualPair> two = {{EmbeddingPair(a)}, {EmbeddingPair(b)}};
    CHECK(context_consistent_loss(two) == 4.0);

    Rng rng(2);
    const Vec v = rng.normal_vector(32);
    const std::vector<ContextualPair> same(8, ContextualPair{EmbeddingPair(v)});
    CHECK(context_consistent_loss(same) == 0.0);

    // Three points at 0, 1 and 3 on a line: (1 + 9 + 4) / 3.
    std::vector<ContextualPair> line;
    for (double x : {0.0, 1.0, 3.0}) line.push_back({EmbeddingPair(Vec::Constant(2, 0.0) + Vec::Unit(2, 0) * x)});
    CHECK(context_consistent_loss(line) == doctest::Approx(14.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(context_consistent_loss(std::vector<ContextualPair>(1, ContextualPair{EmbeddingPair(v)})), Error);
    const std::vector<ContextualPair> ragged = {{EmbeddingPair(a)}, {EmbeddingPair(Vec(Vec::Zero(6)))}};
    CHECK_THROWS_AS(context_consistent_loss(ragged), MismatchError);
}

TEST_CASE("context loss is bit-exactly permutation invariant") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        auto pairs = random_pairs(rng, 8, 32);
        const double base = context_consistent_loss(pairs);
        for (int k = 7; k > 0; --k) std::swap(pairs[k], pairs[rng.index(static_cast<std::size_t>(k) + 1)]);
        CHECK(context_consistent_loss(pairs) == base);
    }
}

TEST_CASE("context loss translation invariance") {
    Rng rng(4);
    for (int rep = 0; rep < 50; ++rep) {
        const auto exact = dyadic_pairs(rng, 8, 32);
        Vec t(32);
        for (int e = 0; e < 32; ++e) t[e] = (static_cast<double>(rng.index(16)) - 8.0) / 4.0;
        CHECK(context_consistent_loss(shifted(exact, t)) == context_consistent_loss(exact));

        const auto pairs = random_pairs(rng, 8, 32);
        const double base = context_consistent_loss(pairs);
        CHECK(context_consistent_loss(shifted(pairs, rng.normal_vector(32))) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("context loss scales with the square of a uniform factor") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const auto pairs = random_pairs(rng, 8, 32);
        const double base = context_consistent_loss(pairs);
        for (double c : {2.0, 0.5, -4.0, 0.125}) CHECK(context_consistent_loss(scaled(pairs, c)) == c * c * base);
        const double c = 0.1 + rng.uniform() * 5.0;
        CHECK(context_consistent_loss(scaled(pairs, c)) == doctest::Approx(c * c * base).epsilon(1e-13));
    }
}

TEST_CASE("context loss gradient matches central differences") {
    Rng rng(6);
    auto pairs = random_pairs(rng, 5, 6);
    const auto grads = context_consistent_loss_grad(pairs);
    std::vector<double> analytic, numeric;
    const double h = 1e-6;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (int e = 0; e < 6; ++e) {
            analytic.push_back(grads[i][e]);
            const double saved = pairs[i].values.values[e];
            pairs[i].values.values[e] = saved + h;
            const double up = context_consistent_loss(pairs);
            pairs[i].values.values[e] = saved - h;
            const double down = context_consistent_loss(pairs);
            pairs[i].values.values[e] = saved;
            numeric.push_back((up - down) / (2 * h));
        }
    }
    CHECK(compare_gradients(analytic, numeric).max_rel_error < 1e-6);
}

TEST_CASE("adversarial losses at the uninformed point") {
    const auto l = adversarial_losses(0.5, 0.5);
    CHECK(std::abs(l.discriminator - 2.0 * std::numbers::ln2) < 1e-9);
    CHECK(l.generator == doctest::Approx(std::numbers::ln2));
    CHECK(adversarial_losses(0.5, 0.5, GeneratorLossForm::Minimax).generator == doctest::Approx(-std::numbers::ln2));
}

TEST_CASE("adversarial losses clamp probabilities before the logs") {
    const auto l = adversarial_losses(0.0, 1.0);
    CHECK(std::isfinite(l.discriminator));
    CHECK(l.discriminator == doctest::Approx(-2.0 * std::log(kProbabilityEpsilon)).epsilon(1e-6));
    CHECK(std::isfinite(adversarial_losses(1.0, 0.0).generator));
    CHECK(adversarial_losses(1.0, 0.0).discriminator == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(adversarial_losses(1.5, 0.5), Error);
    CHECK_THROWS_AS(adversarial_losses(0.5, std::nan("")), Error);
}

TEST_CASE("logit-space gradients equal probability gradients times the sigmoid slope") {
    Rng rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const double lr = 3.0 * rng.normal(), lf = 3.0 * rng.normal();
        const double pr = sigmoid(lr), pf = sigmoid(lf);
        const auto pg = discriminator_loss_grad(pr, pf);
        const auto lg = discriminator_loss_logit_grad(lr, lf);
        CHECK(lg[0] == doctest::Approx(pg[0] * pr * (1 - pr)).epsilon(1e-9));
        CHECK(lg[1] == doctest::Approx(pg[1] * pf * (1 - pf)).epsilon(1e-9));
        for (auto form : {GeneratorLossForm::NonSaturating, GeneratorLossForm::Minimax}) {
            CHECK(generator_loss_logit_grad(lf, form) ==
                  doctest::Approx(generator_loss_grad(pf, form) * pf * (1 - pf)).epsilon(1e-9));
        }
    }
}

TEST_CASE("probability-space gradients match central differences") {
    const double h = 1e-7;
    for (double pr : {0.2, 0.5, 0.9}) {
        for (double pf : {0.1, 0.5, 0.7}) {
            const auto g = discriminator_loss_grad(pr, pf);
            const double nr = (adversarial_losses(pr + h, pf).discriminator - adversarial_losses(pr - h, pf).discriminator) / (2 * h);
            const double nf = (adversarial_losses(pr, pf + h).discriminator - adversarial_losses(pr, pf - h).discriminator) / (2 * h);
            CHECK(g[0] == doctest::Approx(nr).epsilon(1e-6));
            CHECK(g[1] == doctest::Approx(nf).epsilon(1e-6));
            const double ng = (adversarial_losses(pr, pf + h).generator - adversarial_losses(pr, pf - h).generator) / (2 * h);
            CHECK(generator_loss_grad(pf, GeneratorLossForm::NonSaturating) == doctest::Approx(ng).epsilon(1e-6));
        }
    }
}

TEST_CASE("sigmoid is stable at extreme logits") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(sigmoid(-30.0) > 0.0);
    CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0).epsilon(1e-15));
}
