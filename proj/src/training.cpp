#include "charfac/training.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace charfac {

std::string TrainingLogRecord::to_json_line() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["loss_d"] = loss_d;
    j["loss_g_adv"] = loss_g_adv;
    j["loss_con"] = loss_con;
    j["d_real"] = d_real;
    j["d_fake"] = d_fake;
    j["wall_ms"] = wall_ms;
    return j.dump();
}

TrainingLogRecord TrainingLogRecord::from_json_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        TrainingLogRecord r;
        r.step = j.at("step").get<std::int64_t>();
        r.loss_d = j.at("loss_d").get<double>();
        r.loss_g_adv = j.at("loss_g_adv").get<double>();
        r.loss_con = j.at("loss_con").get<double>();
        r.d_real = j.at("d_real").get<double>();
        r.d_fake = j.at("d_fake").get<double>();
        r.wall_ms = j.at("wall_ms").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("training log record: ") + e.what());
    }
}

bool TrainingLogRecord::same_values(const TrainingLogRecord& o) const {
    return step == o.step && loss_d == o.loss_d && loss_g_adv == o.loss_g_adv && loss_con == o.loss_con &&
           d_real == o.d_real && d_fake == o.d_fake;
}

bool TrainingLogRecord::all_finite() const {
    return std::isfinite(loss_d) && std::isfinite(loss_g_adv) && std::isfinite(loss_con) && std::isfinite(d_real) &&
           std::isfinite(d_fake);
}

Checkpoint TrainingState::to_checkpoint() const {
    Checkpoint c;
    c.generator = generator;
    c.discriminator = discriminator;
    c.generator_opt = generator_opt;
    c.discriminator_opt = discriminator_opt;
    c.stats = stats;
    c.config = config;
    c.step = step;
    c.rng_state = rng.save_state();
    c.base_model_id = base_model_id;
    c.name_list_hash = name_list_hash;
    c.prompt_corpus_hash = prompt_corpus_hash;
    return c;
}

TrainingState TrainingState::from_checkpoint(const Checkpoint& c) {
    TrainingState s;
    s.generator = c.generator;
    s.discriminator = c.discriminator;
    s.generator_opt = c.generator_opt;
    s.discriminator_opt = c.discriminator_opt;
    s.stats = c.stats;
    s.config = c.config;
    s.step = c.step;
    s.rng.load_state(c.rng_state);
    s.base_model_id = c.base_model_id;
    s.name_list_hash = c.name_list_hash;
    s.prompt_corpus_hash = c.prompt_corpus_hash;
    return s;
}

TrainingState init_training(const TrainingConfig& config, const CelebEmbeddingBank& bank,
                            const std::string& base_model_id, const std::string& prompt_corpus_hash) {
    config.validate();
    if (bank.dim() != config.shape.dim) {
        throw MismatchError("init_training: bank dim " + std::to_string(bank.dim()) + " differs from config dim " +
                            std::to_string(config.shape.dim));
    }
    TrainingState s;
    s.config = config;
    s.rng = Rng(config.seed);
    s.generator = init_generator(config.shape, s.rng);
    s.discriminator = init_discriminator(config.shape, s.rng);
    s.generator_opt = AdamState::for_params(s.generator.mlp);
    s.discriminator_opt = AdamState::for_params(s.discriminator.mlp);
    s.stats = compute_stats(bank);
    s.base_model_id = base_model_id.empty() ? bank.model_id() : base_model_id;
    s.name_list_hash = bank.name_list_hash();
    s.prompt_corpus_hash = prompt_corpus_hash;
    return s;
}

DiscriminatorStepResult discriminator_update(TrainingState& state, const EmbeddingPair& real,
                                             const EmbeddingPair& fake) {
    auto& d = state.discriminator;
    MlpTrace real_trace, fake_trace;
    const auto out_real = discriminator_forward(real, d, &real_trace);
    const auto out_fake = discriminator_forward(fake, d, &fake_trace);
    const auto losses = adversarial_losses(out_real.probability, out_fake.probability, state.config.generator_loss);
    const auto g = discriminator_loss_logit_grad(out_real.logit, out_fake.logit);
    MlpParams grads = d.mlp.zeros_like();
    const double w = state.config.lambda_adv;
    discriminator_backward(d, real_trace, w * g[0], &grads);
    discriminator_backward(d, fake_trace, w * g[1], &grads);
    adam_step(d.mlp, grads, state.discriminator_opt, state.config.adam);
    return {losses.discriminator, out_real.probability, out_fake.probability};
}

GeneratorStepResult generator_update(TrainingState& state, const LatentCode& z,
                                     std::span<const PromptTemplate> templates, const FrozenTextModel& text) {
    const auto& cfg = state.config;
    GeneratorTrace g_trace;
    const EmbeddingPair fake = generator_forward(z, state.generator, state.stats, &g_trace);

    MlpTrace d_trace;
    const auto out_fake = discriminator_forward(fake, state.discriminator, &d_trace);
    GeneratorStepResult res;
    res.loss_adv = adversarial_losses(0.5, out_fake.probability, cfg.generator_loss).generator;
    Vec d_fake = discriminator_backward(state.discriminator, d_trace,
                                        generator_loss_logit_grad(out_fake.logit, cfg.generator_loss), nullptr);
    d_fake *= cfg.lambda_adv;

    if (templates.size() >= 2) {
        std::vector<ContextualPair> pairs;
        std::vector<ContextualTrace> traces(templates.size());
        pairs.reserve(templates.size());
        for (std::size_t i = 0; i < templates.size(); ++i) {
            pairs.push_back(embed_prompt_with_identity(templates[i], fake, text, &traces[i]));
        }
        res.loss_con = context_consistent_loss(pairs);
        if (cfg.lambda_con != 0.0) {
            const auto grads = context_consistent_loss_grad(pairs);
            for (std::size_t i = 0; i < templates.size(); ++i) {
                d_fake += cfg.lambda_con * embed_prompt_backward(text, traces[i], grads[i]);
            }
        }
    }

    MlpParams grads = state.generator.mlp.zeros_like();
    generator_backward(state.generator, state.stats, g_trace, d_fake, grads);
    adam_step(state.generator.mlp, grads, state.generator_opt, cfg.adam);
    return res;
}

TrainingLogRecord training_step(TrainingState& state, const CelebEmbeddingBank& bank, const PromptCorpus& corpus,
                                const FrozenTextModel& text) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& cfg = state.config;
    if (corpus.size() < static_cast<std::size_t>(cfg.prompts_per_step)) {
        throw Error("training_step: corpus has " + std::to_string(corpus.size()) + " templates, need " +
                    std::to_string(cfg.prompts_per_step));
    }
    if (text.dim() != cfg.shape.dim) throw MismatchError("training_step: encoder dim differs from config dim");

    const LatentCode z = LatentCode::sample(cfg.shape.z_dim, state.rng);
    const EmbeddingPair real = augment_real(bank.sample(state.rng), cfg.noise, state.rng);
    const auto picks = state.rng.sample_without_replacement(corpus.size(), static_cast<std::size_t>(cfg.prompts_per_step));
    std::vector<PromptTemplate> templates;
    templates.reserve(picks.size());
    for (auto i : picks) templates.push_back(corpus.templates[i]);

    const EmbeddingPair fake = generator_forward(z, state.generator, state.stats);
    const auto d_res = discriminator_update(state, real, fake);
    const auto g_res = generator_update(state, z, templates, text);
    ++state.step;

    TrainingLogRecord rec;
    rec.step = state.step;
    rec.loss_d = d_res.loss;
    rec.loss_g_adv = g_res.loss_adv;
    rec.loss_con = g_res.loss_con;
    rec.d_real = d_res.d_real;
    rec.d_fake = d_res.d_fake;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!rec.all_finite() || !state.generator.mlp.all_finite() || !state.discriminator.mlp.all_finite()) {
        throw TrainingAborted("training diverged at step " + std::to_string(rec.step) + ": " + rec.to_json_line(), rec);
    }
    return rec;
}

TrainResult train(TrainingState& state, const CelebEmbeddingBank& bank, const PromptCorpus& corpus,
                  const FrozenTextModel& text, const TrainOptions& options) {
    TrainResult result;
    std::ofstream log;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        log.open(options.out_dir / "train_log.jsonl", state.step == 0 ? std::ios::trunc : std::ios::app);
        if (!log) throw Error("cannot open training log in " + options.out_dir.string());
    }
    const auto every = state.config.checkpoint_every;
    while (state.step < state.config.steps) {
        auto rec = training_step(state, bank, corpus, text);
        if (log.is_open()) {
            log << rec.to_json_line() << '\n';
            log.flush();
            if (!log) throw Error("write failed on training log (disk full?)");
        }
        if (options.on_record) options.on_record(rec);
        result.log.push_back(rec);
        if (!options.out_dir.empty() && every > 0 && state.step % every == 0 && state.step < state.config.steps) {
            state.to_checkpoint().save(options.out_dir / ("checkpoint_" + std::to_string(state.step) + ".cfck"));
        }
    }
    result.final_checkpoint = state.to_checkpoint();
    if (!options.out_dir.empty()) result.final_checkpoint.save(options.out_dir / "final.cfck");
    return result;
}

std::map<std::string, std::vector<NameEntry>> stratified_split(const std::vector<NameEntry>& names,
                                                               const std::string& attribute) {
    std::map<std::string, std::vector<NameEntry>> groups;
    for (const auto& n : names) {
        const auto it = n.attributes.find(attribute);
        if (it == n.attributes.end()) {
            throw Error("stratified_split: '" + n.full_name() + "' has no '" + attribute + "' attribute");
        }
        groups[it->second].push_back(n);
    }
    return groups;
}

}  // namespace charfac
