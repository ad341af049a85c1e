// Acceptance gate: one PASS/FAIL/SKIPPED line per criterion.

#include "desk_scale.hpp"
#include "oracles.hpp"

#include "charfac/adain.hpp"
#include "charfac/binary_io.hpp"
#include "charfac/context_consistency.hpp"
#include "charfac/eval_backends.hpp"
#include "charfac/evaluation.hpp"
#include "charfac/inference.hpp"
#include "charfac/rng.hpp"
#include "charfac/training.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace charfac;
using namespace charfac::testing;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    enum Kind { Pass, Fail, Skipped } kind = Fail;
    std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Fail ? "FAIL" : "SKIPPED";
    if (o.kind == Outcome::Fail) ++failures;
    std::cout << tag << "  " << name << "  (" << o.detail << "; " << fmt(secs) << " s)" << std::endl;
}

struct Desk {
    BaseModel model = make_toy_base_model(desk_model_spec());
    CelebEmbeddingBank bank = two_cluster_bank(16, 20, 6.0, 0.5, 5, model.id());
    PromptCorpus corpus = make_corpus(desk_training_prompts(), model.text().tokenizer);
};

const Desk& desk() {
    static const Desk d;
    return d;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("charfac_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string checkpoint_bytes(const Checkpoint& c, const fs::path& path) {
    c.save(path);
    return read_file(path);
}

Outcome adain_cases() {
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int d = 2 + static_cast<int>(rng.index(32));
        const Vec raw = rng.normal_vector(d) * std::exp(rng.normal());
        const Vec mean = rng.normal_vector(d);
        const Vec sd = rng.normal_vector(d).cwiseAbs().array() + 0.05;
        const auto expect = adain_oracle(to_std(raw), to_std(mean), to_std(sd));
        const Vec got = adain(raw, mean, sd);
        for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(got[j] - expect[j]));
    }
    bool raised = false;
    try {
        adain(Vec::Constant(16, 0.7), Vec::Zero(16), Vec::Ones(16));
    } catch (const DegenerateInputError&) {
        raised = true;
    }
    return verdict(worst < 1e-6 && raised,
                   "max |err| " + fmt(worst) + ", zero variance " + (raised ? "raises" : "does not raise"));
}

double lcon(const Mat& m) {
    std::vector<ContextualPair> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back({EmbeddingPair(Vec(m.row(i).transpose()))});
    return context_consistent_loss(rows);
}

Outcome loss_algebra() {
    Rng rng(77);
    int broken = 0;
    double oracle_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.index(8));
        // Dyadic fixtures keep every sum exact, so the identities hold bit for bit.
        Mat m = Mat::NullaryExpr(n, 32, [&] { return (static_cast<double>(rng.index(64)) - 32.0) / 8.0; });
        const double base = lcon(m);
        oracle_err = std::max(oracle_err, std::abs(base - context_loss_oracle([&] {
                                                       std::vector<std::vector<double>> r;
                                                       for (Eigen::Index i = 0; i < m.rows(); ++i)
                                                           r.push_back(to_std(m.row(i).transpose()));
                                                       return r;
                                                   }())));
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[rng.index(i + 1)]);
        Mat perm(n, 32);
        for (int i = 0; i < n; ++i) perm.row(i) = m.row(order[static_cast<std::size_t>(i)]);
        if (lcon(perm) != base) ++broken;

        const Vec shift = Vec::NullaryExpr(32, [&] { return (static_cast<double>(rng.index(16)) - 8.0) / 4.0; });
        if (lcon(m.rowwise() + shift.transpose()) != base) ++broken;
        for (double c : {2.0, 0.5, -4.0, 0.125})
            if (lcon(m * c) != c * c * base) ++broken;
        if (lcon(Mat(m.row(0).replicate(n, 1))) != 0.0) ++broken;
    }
    Mat hand(2, 2);
    hand << 0, 0, 2, 0;
    const double two = lcon(hand);
    const auto adv = adversarial_losses(0.5, 0.5, GeneratorLossForm::NonSaturating);
    const double adv_err = std::abs(adv.discriminator - 2.0 * std::log(2.0));
    const bool ok = broken == 0 && oracle_err < 1e-12 && two == 4.0 && adv_err < 1e-9;
    return verdict(ok, std::to_string(broken) + " invariance violations, oracle err " + fmt(oracle_err) +
                           ", N=2 case " + fmt(two) + ", |L_D(0.5,0.5) - 2 ln 2| " + fmt(adv_err));
}

Outcome gradients() {
    const BaseModel model = gradient_model();
    double worst = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto f = make_gradient_fixture(model, seed);
        worst = std::max(worst, check_generator(f, model.text()).max_rel_error);
        worst = std::max(worst, check_discriminator(f).max_rel_error);
        worst = std::max(worst, check_encoder(f, model.text()).max_rel_error);
    }
    return verdict(worst < 1e-3, "max relative error " + fmt(worst) + " over G, D and the 1-layer encoder");
}

Outcome determinism() {
    const auto& d = desk();
    const fs::path dir = scratch("determinism");
    auto s1 = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    auto s2 = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    const auto r1 = train(s1, d.bank, d.corpus, d.model.text());
    const auto r2 = train(s2, d.bank, d.corpus, d.model.text());
    bool logs_equal = r1.log.size() == 10 && r2.log.size() == 10;
    for (std::size_t i = 0; logs_equal && i < 10; ++i) logs_equal = r1.log[i].same_values(r2.log[i]);
    const bool weights_equal = checkpoint_bytes(r1.final_checkpoint, dir / "a.cfck") ==
                               checkpoint_bytes(r2.final_checkpoint, dir / "b.cfck");

    auto part = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    for (int i = 0; i < 4; ++i) training_step(part, d.bank, d.corpus, d.model.text());
    part.to_checkpoint().save(dir / "mid.cfck");
    auto resumed = TrainingState::from_checkpoint(Checkpoint::load(dir / "mid.cfck"));
    const auto rest = train(resumed, d.bank, d.corpus, d.model.text());
    bool continued = rest.log.size() == 6;
    for (std::size_t i = 0; continued && i < 6; ++i) continued = rest.log[i].same_values(r1.log[i + 4]);
    continued = continued && checkpoint_bytes(rest.final_checkpoint, dir / "c.cfck") == read_file(dir / "a.cfck");
    fs::remove_all(dir);
    return verdict(logs_equal && weights_equal && continued,
                   std::string("logs ") + (logs_equal ? "identical" : "differ") + ", weights " +
                       (weights_equal ? "identical" : "differ") + ", resume " + (continued ? "identical" : "differs"));
}

Outcome frozen_encoder() {
    const auto& d = desk();
    const std::string before = d.model.text().encoder.parameter_hash();
    const std::string model_before = d.model.parameter_hash();
    auto s = init_training(desk_config(16, 1, 1, 50, 5), d.bank);
    train(s, d.bank, d.corpus, d.model.text());
    const bool ok = d.model.text().encoder.parameter_hash() == before && d.model.parameter_hash() == model_before;
    return verdict(ok, "encoder hash " + before.substr(0, 12) + (ok ? " unchanged" : " changed") + " after 50 steps");
}

Outcome ablation() {
    const BaseModel model = make_toy_base_model(desk_model_spec());
    const auto bank = two_cluster_bank(16, 100, 6.0, 0.5, 6, model.id());
    const auto corpus = make_corpus(desk_training_prompts(), model.text().tokenizer);
    const auto heldout = make_corpus(desk_heldout_prompts(), model.text().tokenizer).templates;

    auto run = [&](double lambda_con) {
        auto s = init_training(desk_config(16, 1, lambda_con, 2000, 1), bank);
        const auto ckpt = train(s, bank, corpus, model.text()).final_checkpoint;
        return ablation_stats(ckpt, model.text(), heldout, 32, 1000, 99);
    };
    const auto only_adv = run(0.0);
    const auto both = run(1.0);
    const double ratio_adv = only_adv.within / only_adv.between;
    const double ratio_both = both.within / both.between;
    const bool adv_ok = only_adv.p_value >= 0.05;
    const bool both_ok = ratio_both < 0.25;
    std::string detail = "adversarial only: within/between " + fmt(ratio_adv) + ", permutation p " +
                         fmt(only_adv.p_value) + (adv_ok ? "" : " (distinguishable from random pairing)") +
                         "; with consistency: within/between " + fmt(ratio_both);
    return verdict(adv_ok && both_ok, detail);
}

Outcome interpolation() {
    const auto& d = desk();
    auto s = init_training(desk_config(16, 1, 1, 200, 2), d.bank);
    const auto ckpt = train(s, d.bank, d.corpus, d.model.text()).final_checkpoint;
    double prev = 1e300;
    bool monotone = true;
    std::string means;
    for (double delta : {0.25, 0.1, 0.01}) {
        Rng draws(7);
        double total = 0.0;
        for (int i = 0; i < 20; ++i) {
            const auto z1 = LatentCode::sample(ckpt.z_dim(), draws), z2 = LatentCode::sample(ckpt.z_dim(), draws);
            const double t = draws.uniform() * (1.0 - delta);
            const auto a = sample_identity(ckpt, d.model, interpolate(z1, z2, t)).embeddings;
            const auto b = sample_identity(ckpt, d.model, interpolate(z1, z2, t + delta)).embeddings;
            total += (a.values - b.values).norm();
        }
        const double mean = total / 20.0;
        monotone = monotone && mean < prev;
        prev = mean;
        means += (means.empty() ? "" : " > ") + fmt(mean);
    }
    return verdict(monotone, "mean distance for delta 0.25, 0.1, 0.01: " + means);
}

Image noise_image(std::uint64_t seed) {
    Rng rng(seed);
    Image img(32, 32);
    for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng.index(256));
    return img;
}

Outcome metric_fixtures() {
    ImageGrid grid;
    std::vector<Image> all;
    const std::vector<std::string> prompts = {"a photo of {ID}", "{ID} reading a book", "{ID} on the beach",
                                              "a sketch of {ID}"};
    for (int k = 0; k < 4; ++k) {
        const Image img = noise_image(500 + static_cast<std::uint64_t>(k));
        for (const auto& p : prompts) {
            grid.add("id" + std::to_string(k), p, img);
            all.push_back(img);
        }
    }
    const ReferenceFace face;
    const ReferencePerceptual perceptual;
    const double ic = identity_consistency(grid, face).value;
    const double fd = face_diversity(grid, face, perceptual).value;
    const double tfd = trusted_face_diversity(grid, face, perceptual).value;
    const double fid = image_quality_fid(all, all, ReferenceFeatures{}).value;
    const bool ok = std::abs(ic - 1.0) < 1e-9 && fd == 0.0 && tfd == 0.0 && fid < 1e-3;
    return verdict(ok, "identity_consistency " + fmt(ic) + ", face_diversity " + fmt(fd) +
                           ", trusted_face_diversity " + fmt(tfd) + ", FID(A,A) " + fmt(fid));
}

Outcome full_scale() {
    const char* report_path = std::getenv("CHARFAC_FULL_SCALE_REPORT");
    if (!report_path || !*report_path) {
        return {Outcome::Skipped, "set CHARFAC_FULL_SCALE_REPORT to a `charfac evaluate` report of the 70x40 grid"};
    }
    const auto j = nlohmann::json::parse(read_file(report_path));
    if (j.at("identities").get<int>() != 70 || j.at("prompts").get<int>() != 40) {
        return fail("report is not a 70x40 grid");
    }
    const double ic = j.at("identity_consistency"), ed = j.at("editability"), tfd = j.at("trusted_face_diversity");
    const bool has_fid = j.contains("image_quality_fid");
    const double fid = has_fid ? j.at("image_quality_fid").get<double>() : NAN;
    const bool ok = std::abs(ic - 0.498) <= 0.05 && std::abs(ed - 0.332) <= 0.05 && std::abs(tfd - 0.140) <= 0.05 &&
                    has_fid && std::abs(fid - 22.58) <= 5.0;
    return verdict(ok, "identity_consistency " + fmt(ic) + ", editability " + fmt(ed) + ", trusted_face_diversity " +
                           fmt(tfd) + ", FID " + (has_fid ? fmt(fid) : std::string("missing")));
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    std::cout << "property suite (CPU, stub encoder, d=16)" << std::endl;
    criterion("AdaIN matches the oracle on 1000 random cases at 1e-6; zero variance raises", adain_cases);
    criterion("L_con invariances, hand cases and L_adv at (0.5, 0.5)", loss_algebra);
    criterion("finite-difference gradients of L_adv and L_con below 1e-3 relative", gradients);
    criterion("fixed-seed 10-step runs and checkpoint continuation are bit-identical", determinism);
    criterion("text encoder hash unchanged across training", frozen_encoder);
    criterion("ablation: adversarial-only pairs look random, consistency gives within < 25% of between", ablation);
    const double property_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    criterion("property suite finishes within 2 minutes", [&] {
        return verdict(property_secs < 120.0, fmt(property_secs) + " s");
    });

    criterion("interpolation distance decreases with the step over 20 draws", interpolation);
    criterion("duplicated-image grid gives the ideal metric values", metric_fixtures);
    criterion("full-scale metrics within tolerance of the targets", full_scale);
    criterion("full-scale per-character sampling and render within 10 s", [] {
        if (!std::getenv("CHARFAC_FULL_SCALE_REPORT")) return Outcome{Outcome::Skipped, "needs full-scale assets"};
        return Outcome{Outcome::Skipped, "time with `charfac story` on the production model"};
    });

    std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criterion(s) failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
