#include "charfac/checkpoint.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/hashing.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace charfac {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::string loss_form_name(GeneratorLossForm f) {
    return f == GeneratorLossForm::NonSaturating ? "non_saturating" : "minimax";
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void TrainingConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw Error("training config: " + msg);
    };
    require(std::isfinite(lambda_adv) && lambda_adv >= 0, "lambda_adv must be finite and >= 0");
    require(std::isfinite(lambda_con) && lambda_con >= 0, "lambda_con must be finite and >= 0");
    require(steps >= 0, "steps must be >= 0");
    require(batch_size == 1, "only batch_size = 1 is supported");
    require(adam.learning_rate > 0, "learning_rate must be > 0");
    require(adam.beta1 >= 0 && adam.beta1 < 1, "beta1 must lie in [0, 1)");
    require(adam.beta2 >= 0 && adam.beta2 < 1, "beta2 must lie in [0, 1)");
    require(adam.epsilon > 0, "adam_epsilon must be > 0");
    require(prompts_per_step >= 2, "prompts_per_step must be >= 2");
    require(noise.scale >= 0, "noise_scale must be >= 0");
    require(shape.z_dim > 0 && shape.dim > 0 && shape.generator_hidden > 0, "network widths must be positive");
    require(shape.discriminator_hidden[0] > 0 && shape.discriminator_hidden[1] > 0, "network widths must be positive");
    require(shape.leaky_slope >= 0 && shape.leaky_slope < 1, "leaky_slope must lie in [0, 1)");
    require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
}

TrainingConfig TrainingConfig::from_kv(const KeyValueConfig& kv) {
    static const std::set<std::string> known = {
        "lambda_adv", "lambda_con", "steps", "batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon",
        "prompts_per_step", "noise_scale", "noise_enabled", "z_dim", "dim", "generator_hidden",
        "discriminator_hidden1", "discriminator_hidden2", "leaky_slope", "seed", "generator_loss",
        "checkpoint_every"};
    for (const auto& [k, v] : kv.entries()) {
        if (!known.contains(k)) throw FormatError("training config: unknown key '" + k + "'");
    }
    TrainingConfig c;
    if (kv.has("lambda_adv")) c.lambda_adv = kv.get_double("lambda_adv");
    if (kv.has("lambda_con")) c.lambda_con = kv.get_double("lambda_con");
    if (kv.has("steps")) c.steps = kv.get_int("steps");
    if (kv.has("batch_size")) c.batch_size = static_cast<int>(kv.get_int("batch_size"));
    if (kv.has("learning_rate")) c.adam.learning_rate = kv.get_double("learning_rate");
    if (kv.has("beta1")) c.adam.beta1 = kv.get_double("beta1");
    if (kv.has("beta2")) c.adam.beta2 = kv.get_double("beta2");
    if (kv.has("adam_epsilon")) c.adam.epsilon = kv.get_double("adam_epsilon");
    if (kv.has("prompts_per_step")) c.prompts_per_step = static_cast<int>(kv.get_int("prompts_per_step"));
    if (kv.has("noise_scale")) c.noise.scale = kv.get_double("noise_scale");
    if (kv.has("noise_enabled")) c.noise.enabled = kv.get_bool("noise_enabled");
    if (kv.has("z_dim")) c.shape.z_dim = static_cast<int>(kv.get_int("z_dim"));
    if (kv.has("dim")) c.shape.dim = static_cast<int>(kv.get_int("dim"));
    if (kv.has("generator_hidden")) c.shape.generator_hidden = static_cast<int>(kv.get_int("generator_hidden"));
    if (kv.has("discriminator_hidden1"))
        c.shape.discriminator_hidden[0] = static_cast<int>(kv.get_int("discriminator_hidden1"));
    if (kv.has("discriminator_hidden2"))
        c.shape.discriminator_hidden[1] = static_cast<int>(kv.get_int("discriminator_hidden2"));
    if (kv.has("leaky_slope")) c.shape.leaky_slope = kv.get_double("leaky_slope");
    if (kv.has("seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
    if (kv.has("generator_loss")) {
        const auto& f = kv.get("generator_loss");
        if (f == "non_saturating") c.generator_loss = GeneratorLossForm::NonSaturating;
        else if (f == "minimax") c.generator_loss = GeneratorLossForm::Minimax;
        else throw FormatError("training config: generator_loss must be non_saturating or minimax");
    }
    if (kv.has("checkpoint_every")) c.checkpoint_every = kv.get_int("checkpoint_every");
    c.validate();
    return c;
}

TrainingConfig TrainingConfig::load(const std::filesystem::path& path) { return from_kv(KeyValueConfig::load(path)); }

KeyValueConfig TrainingConfig::to_kv() const {
    KeyValueConfig kv;
    kv.set("lambda_adv", fmt_double(lambda_adv));
    kv.set("lambda_con", fmt_double(lambda_con));
    kv.set("steps", std::to_string(steps));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("learning_rate", fmt_double(adam.learning_rate));
    kv.set("beta1", fmt_double(adam.beta1));
    kv.set("beta2", fmt_double(adam.beta2));
    kv.set("adam_epsilon", fmt_double(adam.epsilon));
    kv.set("prompts_per_step", std::to_string(prompts_per_step));
    kv.set("noise_scale", fmt_double(noise.scale));
    kv.set("noise_enabled", noise.enabled ? "true" : "false");
    kv.set("z_dim", std::to_string(shape.z_dim));
    kv.set("dim", std::to_string(shape.dim));
    kv.set("generator_hidden", std::to_string(shape.generator_hidden));
    kv.set("discriminator_hidden1", std::to_string(shape.discriminator_hidden[0]));
    kv.set("discriminator_hidden2", std::to_string(shape.discriminator_hidden[1]));
    kv.set("leaky_slope", fmt_double(shape.leaky_slope));
    kv.set("seed", std::to_string(seed));
    kv.set("generator_loss", loss_form_name(generator_loss));
    kv.set("checkpoint_every", std::to_string(checkpoint_every));
    return kv;
}

std::string Checkpoint::id() const {
    Sha256 h;
    for (const auto& l : generator.mlp.layers) h.update(l.weight).update(l.bias);
    for (int i = 0; i < 2; ++i) h.update(stats.mean[i]).update(stats.std[i]);
    return h.hex_digest().substr(0, 16);
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ostringstream os;
    BinaryWriter w(os);
    w.magic("CFCK");
    w.u32(kCheckpointVersion);
    w.u64(static_cast<std::uint64_t>(step));
    w.str(base_model_id);
    w.str(name_list_hash);
    w.str(prompt_corpus_hash);
    w.str(activation);
    w.str(init_scheme);
    w.str(config.to_kv().to_string());
    w.str(rng_state);
    w.u64(static_cast<std::uint64_t>(z_dim()));
    w.u64(static_cast<std::uint64_t>(dim()));
    for (int i = 0; i < 2; ++i) {
        w.vec(stats.mean[i]);
        w.vec(stats.std[i]);
    }
    generator.mlp.save(w);
    discriminator.mlp.save(w);
    generator_opt.save(w);
    discriminator_opt.save(w);
    write_file_atomically(path, os.str());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::istringstream is(read_file(path));
    BinaryReader r(is, path.string());
    r.expect_magic("CFCK");
    if (const auto v = r.u32(); v != kCheckpointVersion) {
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
    }
    Checkpoint c;
    c.step = static_cast<std::int64_t>(r.u64());
    c.base_model_id = r.str();
    c.name_list_hash = r.str();
    c.prompt_corpus_hash = r.str();
    c.activation = r.str();
    c.init_scheme = r.str();
    c.config = TrainingConfig::from_kv(KeyValueConfig::parse(r.str(), path.string() + " (config)"));
    c.rng_state = r.str();
    const auto z_dim = r.u64();
    const auto d = r.u64();
    for (int i = 0; i < 2; ++i) {
        c.stats.mean[i] = r.vec();
        c.stats.std[i] = r.vec();
    }
    c.generator.mlp = MlpParams::load(r);
    c.discriminator.mlp = MlpParams::load(r);
    c.generator_opt = AdamState::load(r);
    c.discriminator_opt = AdamState::load(r);
    if (static_cast<std::uint64_t>(c.z_dim()) != z_dim || static_cast<std::uint64_t>(c.dim()) != d ||
        static_cast<std::uint64_t>(c.stats.dim()) != d || c.discriminator.dim() != c.dim()) {
        throw FormatError(path.string() + ": inconsistent network shapes");
    }
    return c;
}

}  // namespace charfac
