#include "doctest.h"

#include "desk_scale.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/training.hpp"

#include <filesystem>
#include <fstream>

using namespace charfac;
using namespace charfac::testing;

namespace fs = std::filesystem;

namespace {

struct Desk {
    BaseModel model = make_toy_base_model(desk_model_spec());
    CelebEmbeddingBank bank = two_cluster_bank(16, 20, 6.0, 0.5, 5, model.id());
    PromptCorpus corpus = make_corpus(desk_training_prompts(), model.text().tokenizer);
};

const Desk& desk() {
    static const Desk d;
    return d;
}

void check_same_checkpoint(const Checkpoint& a, const Checkpoint& b) {
    CHECK(a.generator.mlp == b.generator.mlp);
    CHECK(a.discriminator.mlp == b.discriminator.mlp);
    CHECK(a.generator_opt == b.generator_opt);
    CHECK(a.discriminator_opt == b.discriminator_opt);
    CHECK(a.stats == b.stats);
    CHECK(a.step == b.step);
    CHECK(a.rng_state == b.rng_state);
    CHECK(a.base_model_id == b.base_model_id);
    CHECK(a.id() == b.id());
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("charfac_training_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("defaults carry the published hyperparameters") {
    const TrainingConfig c;
    CHECK(c.lambda_adv == 1.0);
    CHECK(c.lambda_con == 1.0);
    CHECK(c.steps == 10000);
    CHECK(c.batch_size == 1);
    CHECK(c.adam.learning_rate == 5e-5);
    CHECK(c.adam.beta1 == 0.5);
    CHECK(c.adam.beta2 == 0.999);
    CHECK(c.prompts_per_step == 8);
    CHECK(c.noise.scale == 5e-3);
    CHECK(c.shape.z_dim == 64);
    CHECK(c.shape.generator_hidden == 2048);
    CHECK(c.shape.discriminator_hidden == std::array<int, 2>{512, 256});
    CHECK(c.shape.leaky_slope == 0.2);
    CHECK(c.generator_loss == GeneratorLossForm::NonSaturating);
}

TEST_CASE("config files round trip and reject unknown keys") {
    auto c = desk_config(16, 0.5, 2.0, 7, 9);
    c.generator_loss = GeneratorLossForm::Minimax;
    c.noise.enabled = false;
    const auto back = TrainingConfig::from_kv(KeyValueConfig::parse(c.to_kv().to_string()));
    CHECK(back.to_kv().entries() == c.to_kv().entries());
    CHECK(back.generator_loss == GeneratorLossForm::Minimax);
    CHECK_FALSE(back.noise.enabled);

    CHECK_THROWS_WITH_AS(TrainingConfig::from_kv(KeyValueConfig::parse("lamda_adv = 1")),
                         doctest::Contains("unknown key 'lamda_adv'"), FormatError);
    CHECK_THROWS_AS(TrainingConfig::from_kv(KeyValueConfig::parse("batch_size = 4")), Error);
    CHECK_THROWS_AS(TrainingConfig::from_kv(KeyValueConfig::parse("generator_loss = wasserstein")), Error);

    const auto shipped = TrainingConfig::load(fs::path(CHARFAC_SOURCE_DIR) / "data" / "train.cfg");
    CHECK(shipped.to_kv().entries() == TrainingConfig{}.to_kv().entries());
}

TEST_CASE("config validation") {
    auto bad = [](auto mutate) {
        TrainingConfig c;
        mutate(c);
        return c;
    };
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.lambda_adv = -1; }).validate(), Error);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.lambda_con = std::nan(""); }).validate(), Error);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.adam.learning_rate = 0; }).validate(), Error);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.adam.beta2 = 1.0; }).validate(), Error);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.prompts_per_step = 1; }).validate(), Error);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.shape.z_dim = 0; }).validate(), Error);
    CHECK_NOTHROW(TrainingConfig{}.validate());
}

TEST_CASE("log records round trip through JSON exactly") {
    TrainingLogRecord r{12, 1.0 / 3.0, 0.1, 2.5e-17, 0.7, 0.29999999999999999, 4.25};
    const auto back = TrainingLogRecord::from_json_line(r.to_json_line());
    CHECK(back.same_values(r));
    CHECK(back.wall_ms == r.wall_ms);
    auto other = r;
    other.wall_ms = 99;
    CHECK(other.same_values(r));
    other.loss_con = 0.0;
    CHECK_FALSE(other.same_values(r));
    CHECK_THROWS_AS(TrainingLogRecord::from_json_line("{\"step\": 1}"), FormatError);
    CHECK_THROWS_AS(TrainingLogRecord::from_json_line("not json"), FormatError);
}

TEST_CASE("fixed-seed runs reproduce identical logs and weights") {
    const auto& d = desk();
    auto s1 = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    auto s2 = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    const auto r1 = train(s1, d.bank, d.corpus, d.model.text());
    const auto r2 = train(s2, d.bank, d.corpus, d.model.text());
    REQUIRE(r1.log.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(r1.log[i].same_values(r2.log[i]));
        CHECK(r1.log[i].all_finite());
        CHECK(r1.log[i].step == static_cast<std::int64_t>(i + 1));
    }
    check_same_checkpoint(r1.final_checkpoint, r2.final_checkpoint);

    auto s3 = init_training(desk_config(16, 1, 1, 10, 4), d.bank);
    const auto r3 = train(s3, d.bank, d.corpus, d.model.text());
    CHECK_FALSE(r3.log.back().same_values(r1.log.back()));
}

TEST_CASE("checkpoint save, load and continue is bit-identical") {
    const auto& d = desk();
    auto whole = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    const auto full = train(whole, d.bank, d.corpus, d.model.text());

    auto part = init_training(desk_config(16, 1, 1, 10, 3), d.bank);
    for (int i = 0; i < 4; ++i) training_step(part, d.bank, d.corpus, d.model.text());
    const fs::path dir = scratch("resume");
    fs::create_directories(dir);
    part.to_checkpoint().save(dir / "mid.cfck");
    auto resumed = TrainingState::from_checkpoint(Checkpoint::load(dir / "mid.cfck"));
    CHECK(resumed.rng == part.rng);
    const auto rest = train(resumed, d.bank, d.corpus, d.model.text());
    REQUIRE(rest.log.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(rest.log[i].same_values(full.log[i + 4]));
    check_same_checkpoint(rest.final_checkpoint, full.final_checkpoint);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint files round trip every field") {
    const auto& d = desk();
    auto s = init_training(desk_config(16, 0.5, 2, 3, 8), d.bank, d.model.id(), d.corpus.hash);
    train(s, d.bank, d.corpus, d.model.text());
    const Checkpoint c = s.to_checkpoint();
    const fs::path dir = scratch("ckpt");
    fs::create_directories(dir);
    c.save(dir / "c.cfck");
    const Checkpoint back = Checkpoint::load(dir / "c.cfck");
    check_same_checkpoint(c, back);
    CHECK(back.config.to_kv().entries() == c.config.to_kv().entries());
    CHECK(back.prompt_corpus_hash == d.corpus.hash);
    CHECK(back.name_list_hash == d.bank.name_list_hash());
    CHECK(back.activation == "leaky_relu");
    CHECK(back.init_scheme == "fan_in_normal");
    CHECK(back.id().size() == 16);

    write_file_atomically(dir / "bad.cfck", "CFBMxxxx");
    CHECK_THROWS_AS(Checkpoint::load(dir / "bad.cfck"), FormatError);
    std::string bytes = read_file(dir / "c.cfck");
    bytes.resize(bytes.size() / 2);
    write_file_atomically(dir / "cut.cfck", bytes);
    CHECK_THROWS_AS(Checkpoint::load(dir / "cut.cfck"), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("train writes the log and periodic checkpoints, and appends on resume") {
    const auto& d = desk();
    auto cfg = desk_config(16, 1, 1, 10, 3);
    cfg.checkpoint_every = 4;
    const fs::path dir = scratch("outdir");
    auto s = init_training(cfg, d.bank);
    std::vector<std::int64_t> seen;
    const auto r = train(s, d.bank, d.corpus, d.model.text(), {dir, [&](const TrainingLogRecord& rec) {
                                                                    seen.push_back(rec.step);
                                                                }});
    CHECK(seen.size() == 10);
    CHECK(fs::exists(dir / "checkpoint_4.cfck"));
    CHECK(fs::exists(dir / "checkpoint_8.cfck"));
    CHECK_FALSE(fs::exists(dir / "checkpoint_10.cfck"));
    CHECK(fs::exists(dir / "final.cfck"));

    std::vector<TrainingLogRecord> from_file;
    {
        std::ifstream in(dir / "train_log.jsonl");
        for (std::string line; std::getline(in, line);) from_file.push_back(TrainingLogRecord::from_json_line(line));
    }
    REQUIRE(from_file.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(from_file[i].same_values(r.log[i]));

    auto resumed = TrainingState::from_checkpoint(Checkpoint::load(dir / "checkpoint_8.cfck"));
    train(resumed, d.bank, d.corpus, d.model.text(), {dir, {}});
    std::ifstream in(dir / "train_log.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 12);
    fs::remove_all(dir);
}

TEST_CASE("training leaves the text encoder and the bank untouched") {
    const auto& d = desk();
    const std::string before = d.model.text().encoder.parameter_hash();
    const std::string model_before = d.model.parameter_hash();
    const Mat bank_before = d.bank.matrix();
    auto s = init_training(desk_config(16, 1, 1, 25, 2), d.bank);
    train(s, d.bank, d.corpus, d.model.text());
    CHECK(d.model.text().encoder.parameter_hash() == before);
    CHECK(d.model.parameter_hash() == model_before);
    CHECK(d.bank.matrix() == bank_before);
}

TEST_CASE("each step draws z, the real index, its noise and then the prompts") {
    const auto& d = desk();
    CelebEmbeddingBank bank = d.bank;
    std::vector<std::size_t> accessed;
    bank.set_auditor([&](std::size_t i, const NameEntry&) { accessed.push_back(i); });
    const auto cfg = desk_config(16, 1, 1, 1, 21);
    auto s = init_training(cfg, bank);

    Rng mirror(cfg.seed);
    init_generator(cfg.shape, mirror);
    init_discriminator(cfg.shape, mirror);
    CHECK(mirror == s.rng);
    mirror.normal_vector(cfg.shape.z_dim);
    const std::size_t idx = mirror.index(bank.size());
    mirror.normal_vector(2 * cfg.shape.dim);
    mirror.sample_without_replacement(d.corpus.size(), static_cast<std::size_t>(cfg.prompts_per_step));

    training_step(s, bank, d.corpus, d.model.text());
    REQUIRE(accessed.size() == 1);
    CHECK(accessed[0] == idx);
    CHECK(mirror == s.rng);
}

TEST_CASE("only the consistency term leaves the discriminator untouched") {
    const auto& d = desk();
    auto s = init_training(desk_config(16, 0.0, 1.0, 15, 6), d.bank);
    const MlpParams d_before = s.discriminator.mlp;
    const MlpParams g_before = s.generator.mlp;
    const auto r = train(s, d.bank, d.corpus, d.model.text());
    CHECK(s.discriminator.mlp == d_before);
    CHECK_FALSE(s.generator.mlp == g_before);
    CHECK(r.log.back().loss_con > 0.0);
}

TEST_CASE("a blind discriminator and no consistency term leave the generator untouched") {
    const auto& d = desk();
    auto s = init_training(desk_config(16, 1.0, 0.0, 1, 6), d.bank);
    s.discriminator.mlp.layers.back().weight.setZero();
    const MlpParams g_before = s.generator.mlp;
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
        const auto res = generator_update(s, LatentCode::sample(8, rng), {}, d.model.text());
        CHECK(res.loss_adv == doctest::Approx(std::log(2.0)));
    }
    CHECK(s.generator.mlp == g_before);
}

TEST_CASE("training refuses mismatched inputs") {
    const auto& d = desk();
    CHECK_THROWS_AS(init_training(desk_config(8, 1, 1, 1, 0), d.bank), MismatchError);
    auto s = init_training(desk_config(16, 1, 1, 1, 0), d.bank);
    const auto tiny = make_corpus({"{ID}", "a photo of {ID}"}, d.model.text().tokenizer);
    CHECK_THROWS_AS(training_step(s, d.bank, tiny, d.model.text()), Error);
    const BaseModel narrow = make_toy_base_model(desk_model_spec(8, 11));
    CHECK_THROWS_AS(training_step(s, d.bank, d.corpus, narrow.text()), MismatchError);
}

TEST_CASE("the consistency term ends lower than without it") {
    const auto& d = desk();
    auto late_con = [&](double lambda_con) {
        auto s = init_training(desk_config(16, 1.0, lambda_con, 300, 1), d.bank);
        const auto r = train(s, d.bank, d.corpus, d.model.text());
        double late = 0.0;
        for (int i = 250; i < 300; ++i) late += r.log[i].loss_con;
        return late / 50.0;
    };
    const double with = late_con(1.0), without = late_con(0.0);
    CHECK(with < 0.8 * without);
}

TEST_CASE("stratified training only ever sees its own group") {
    const auto& d = desk();
    const auto groups = stratified_split(d.bank.names(), "cluster");
    REQUIRE(groups.size() == 2);
    CHECK(groups.at("a").size() == 20);

    std::vector<NameEntry> names;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < d.bank.size(); ++i) {
        if (d.bank.names()[i].attributes.at("cluster") == "b") {
            names.push_back(d.bank.names()[i]);
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    CelebEmbeddingBank sub(names, d.bank.matrix()(rows, Eigen::all), d.model.id());
    std::size_t seen = 0;
    sub.set_auditor([&](std::size_t, const NameEntry& e) {
        ++seen;
        CHECK(e.attributes.at("cluster") == "b");
    });
    auto s = init_training(desk_config(16, 1, 1, 20, 0), sub);
    train(s, sub, d.corpus, d.model.text());
    CHECK(seen == 20);

    auto unlabeled = d.bank.names();
    unlabeled[3].attributes.clear();
    const std::string who = unlabeled[3].full_name();
    CHECK_THROWS_WITH_AS(stratified_split(unlabeled, "cluster"), doctest::Contains(who.c_str()), Error);
}
