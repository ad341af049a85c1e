#include "doctest.h"

#include "oracles.hpp"

#include "charfac/mlp.hpp"
#include "charfac/rng.hpp"

using namespace charfac;
using namespace charfac::testing;

TEST_CASE("mlp backward matches central differences for inputs and parameters") {
    Rng rng(1);
    MlpParams p = init_mlp({5, 7, 6, 3}, rng);
    for (auto& l : p.layers) l.bias = rng.normal_vector(l.bias.size()) * 0.1;
    const Vec x = rng.normal_vector(5);
    const Vec w = rng.normal_vector(3);

    MlpTrace trace;
    mlp_forward(p, x, &trace);
    MlpParams grads = p.zeros_like();
    const Vec dx = mlp_backward(p, trace, w, &grads);

    const double h = 1e-6;
    const auto numeric = [&] {
        std::vector<double> out;
        for_each_parameter(p, [&](double& v) {
            const double saved = v;
            v = saved + h;
            const double up = w.dot(mlp_forward(p, x));
            v = saved - h;
            const double down = w.dot(mlp_forward(p, x));
            v = saved;
            out.push_back((up - down) / (2 * h));
        });
        return out;
    }();
    CHECK(compare_gradients(flatten(grads), numeric).max_rel_error < 1e-5);

    std::vector<double> nx;
    for (int i = 0; i < 5; ++i) {
        Vec up = x, down = x;
        up[i] += h;
        down[i] -= h;
        nx.push_back((w.dot(mlp_forward(p, up)) - w.dot(mlp_forward(p, down))) / (2 * h));
    }
    CHECK(compare_gradients(to_std(dx), nx).max_rel_error < 1e-5);
}

TEST_CASE("mlp init follows the fan-in scheme") {
    Rng rng(2);
    const MlpParams p = init_mlp({400, 300, 200}, rng, 0.2);
    const double gain2 = 2.0 / (1.0 + 0.04);
    const auto var = [](const Mat& m) { return m.array().square().mean(); };
    CHECK(var(p.layers[0].weight) == doctest::Approx(gain2 / 400.0).epsilon(0.02));
    CHECK(var(p.layers[1].weight) == doctest::Approx(1.0 / 300.0).epsilon(0.02));
    CHECK(p.layers[0].bias.isZero());
    CHECK(p.parameter_count() == 400u * 300 + 300 + 300 * 200 + 200);
    CHECK(p.leaky_slope == 0.2);
}

TEST_CASE("leaky rectifier keeps a negative slope") {
    MlpParams p;
    p.layers.push_back({Mat::Identity(2, 2), Vec::Zero(2)});
    p.layers.push_back({Mat::Identity(2, 2), Vec::Zero(2)});
    Vec x(2);
    x << -1.0, 3.0;
    const Vec y = mlp_forward(p, x);
    CHECK(y[0] == doctest::Approx(-0.2));
    CHECK(y[1] == 3.0);
}

TEST_CASE("full generator objective gradient through D and the encoder") {
    const BaseModel model = gradient_model();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto f = make_gradient_fixture(model, seed);
        CHECK(check_generator(f, model.text()).max_rel_error < 1e-3);
        f.form = GeneratorLossForm::Minimax;
        f.lambda_con = 0.3;
        CHECK(check_generator(f, model.text()).max_rel_error < 1e-3);
        f.lambda_adv = 0.0;
        CHECK(check_generator(f, model.text()).max_rel_error < 1e-3);
    }
}

TEST_CASE("discriminator loss gradient") {
    const BaseModel model = gradient_model();
    for (std::uint64_t seed : {4u, 5u, 6u}) {
        const auto check = check_discriminator(make_gradient_fixture(model, seed));
        CHECK(check.checked > 100u);
        CHECK(check.max_rel_error < 1e-3);
    }
}

TEST_CASE("consistency loss gradient through the transformer") {
    const BaseModel model = gradient_model();
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        const auto check = check_encoder(make_gradient_fixture(model, seed), model.text());
        CHECK(check.checked == 8u);
        CHECK(check.max_rel_error < 1e-3);
    }
}

TEST_CASE("gradient checks also hold at the desk width") {
    const BaseModel model = gradient_model(16, 11);
    const auto f = make_gradient_fixture(model, 12, 8, 16);
    CHECK(check_encoder(f, model.text()).max_rel_error < 1e-3);
    CHECK(check_generator(f, model.text()).max_rel_error < 1e-3);
}
