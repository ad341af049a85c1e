#include "charfac/base_model.hpp"
#include "charfac/binary_io.hpp"
#include "charfac/checkpoint.hpp"
#include "charfac/context_consistency.hpp"
#include "charfac/embedding_space.hpp"
#include "charfac/evaluation.hpp"
#include "charfac/hashing.hpp"
#include "charfac/inference.hpp"
#include "charfac/rng.hpp"
#include "charfac/studio_server.hpp"
#include "charfac/studio_service.hpp"
#include "charfac/training.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

using namespace charfac;
namespace fs = std::filesystem;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::istringstream is(read_file(path));
    std::vector<std::string> out;
    for (std::string line; std::getline(is, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        out.push_back(line);
    }
    return out;
}

/// Splits "key=value"; an empty string yields nothing.
std::optional<std::pair<std::string, std::string>> parse_attribute(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
        throw Error("--attribute expects key=value, got '" + s + "'");
    }
    return std::make_pair(s.substr(0, eq), s.substr(eq + 1));
}

/// Loads, filters and embeds a name list, optionally keeping one partition.
CelebEmbeddingBank bank_from_names(const BaseModel& model, const fs::path& names_path, const std::string& attribute) {
    auto list = load_name_list(names_path, model.text().tokenizer);
    for (const auto& r : list.rejected) std::cerr << "skipping name (not single-token): " << r << "\n";
    std::string hash = list.hash;
    std::vector<NameEntry> entries = list.entries;
    if (const auto attr = parse_attribute(attribute)) {
        const auto groups = stratified_split(entries, attr->first);
        const auto it = groups.find(attr->second);
        if (it == groups.end()) throw Error("no names with " + attribute);
        entries = it->second;
        hash = sha256_hex(list.hash + "|" + attribute);
        std::cerr << "partition " << attribute << ": " << entries.size() << " names\n";
    }
    return encode_names(entries, model.text(), model.dim(), model.id(), hash);
}

std::int64_t now_unix() { return static_cast<std::int64_t>(std::time(nullptr)); }

StudioServer* g_server = nullptr;

void handle_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sample new consistent characters as word-embedding pairs for a frozen text-to-image model."};
    app.require_subcommand(1);
    std::string model_path = env_or("CHARFAC_BASE_MODEL", "");

    // make-toy-model
    auto* toy = app.add_subcommand("make-toy-model", "Build a small random base model for desk-scale runs");
    std::string toy_out;
    std::vector<std::string> toy_texts;
    ToyModelSpec toy_spec;
    toy_spec.encoder.config.dim = 16;
    toy_spec.encoder.config.layers = 1;
    toy_spec.encoder.config.heads = 2;
    toy_spec.encoder.config.mlp_width = 64;
    toy->add_option("--out", toy_out, "Output base-model file")->required();
    toy->add_option("--vocab-from", toy_texts, "Text files whose words join the vocabulary")->check(CLI::ExistingFile);
    toy->add_option("--name", toy_spec.name, "Model name");
    toy->add_option("--dim", toy_spec.encoder.config.dim, "Embedding width");
    toy->add_option("--layers", toy_spec.encoder.config.layers, "Transformer blocks");
    toy->add_option("--heads", toy_spec.encoder.config.heads, "Attention heads");
    toy->add_option("--mlp-width", toy_spec.encoder.config.mlp_width, "Hidden width of each block's MLP");
    toy->add_option("--token-scale", toy_spec.encoder.token_scale, "Std of token embedding entries");
    toy->add_option("--position-scale", toy_spec.encoder.position_scale, "Std of position embedding entries");
    toy->add_option("--seed", toy_spec.seed, "Weight seed");

    // build-bank
    auto* bank_cmd = app.add_subcommand("build-bank", "Embed a name list into a celeb embedding bank");
    fs::path bank_names, bank_out;
    std::string bank_attr;
    bank_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    bank_cmd->add_option("--names", bank_names, "Name list")->required()->check(CLI::ExistingFile);
    bank_cmd->add_option("--out", bank_out, "Output bank file")->required();
    bank_cmd->add_option("--attribute", bank_attr, "Keep one partition, e.g. gender=woman");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the identity-embedding GAN");
    fs::path cfg_path, names_path, prompts_path, out_dir, resume_path;
    std::string attribute;
    bool only_adv = false, only_con = false;
    std::int64_t steps_override = -1;
    train_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    train_cmd->add_option("--config", cfg_path, "Key-value training config")->check(CLI::ExistingFile);
    train_cmd->add_option("--names", names_path, "Name list")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--prompts", prompts_path, "Prompt corpus")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", out_dir, "Output directory")->required();
    auto* adv_flag = train_cmd->add_flag("--only-adv", only_adv, "Adversarial term only (lambda_con = 0)");
    train_cmd->add_flag("--only-con", only_con, "Consistency term only (lambda_adv = 0)")->excludes(adv_flag);
    train_cmd->add_option("--attribute", attribute, "Train on one partition, e.g. gender=woman");
    train_cmd->add_option("--resume", resume_path, "Continue from a checkpoint")->check(CLI::ExistingFile);
    train_cmd->add_option("--steps", steps_override, "Override the configured step count");

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "Sample a new character");
    fs::path ckpt_path, sample_out;
    std::uint64_t sample_seed = 0;
    bool sample_zero = false;
    sample_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    sample_cmd->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--out", sample_out, "Identity file to write")->required();
    sample_cmd->add_option("--seed", sample_seed, "Latent seed");
    sample_cmd->add_flag("--zero-latent", sample_zero, "Use z = 0");

    // render
    auto* render_cmd = app.add_subcommand("render", "Render one prompt with an identity");
    fs::path identity_path, render_out;
    std::string prompt;
    RenderRequest req;
    render_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    render_cmd->add_option("--identity", identity_path, "Identity file")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--prompt", prompt, "Prompt containing {ID}")->required();
    render_cmd->add_option("--seed", req.seed, "Sampler seed");
    render_cmd->add_option("--guidance", req.sampler.guidance_scale, "Classifier-free guidance scale");
    render_cmd->add_option("--steps", req.sampler.steps, "Sampler steps");
    render_cmd->add_option("--size", req.image_size, "Output size (0 = native)");
    render_cmd->add_option("--out", render_out, "PNG to write")->required();

    // interpolate
    auto* interp_cmd = app.add_subcommand("interpolate", "Identities along the line between two latent codes");
    fs::path interp_a, interp_b, interp_out;
    int interp_steps = 5;
    interp_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    interp_cmd->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required()->check(CLI::ExistingFile);
    interp_cmd->add_option("--a", interp_a, "First identity file")->required()->check(CLI::ExistingFile);
    interp_cmd->add_option("--b", interp_b, "Second identity file")->required()->check(CLI::ExistingFile);
    interp_cmd->add_option("--steps", interp_steps, "Number of points, endpoints included")->check(CLI::Range(2, 1000));
    interp_cmd->add_option("--out-dir", interp_out, "Directory for identity_<k>.cfid")->required();

    // story
    auto* story_cmd = app.add_subcommand("story", "Render a sequence of prompts with one identity");
    fs::path script_path, story_out;
    StoryOptions story_opt;
    std::uint64_t pinned = 0;
    bool pin = false;
    story_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    story_cmd->add_option("--identity", identity_path, "Identity file")->required()->check(CLI::ExistingFile);
    story_cmd->add_option("--script", script_path, "One prompt per line")->required()->check(CLI::ExistingFile);
    story_cmd->add_option("--out-dir", story_out, "Directory for scene_<k>.png")->required();
    story_cmd->add_option("--seed", story_opt.base_seed, "Scene k uses seed + k");
    story_cmd->add_option("--pin-seed", pinned, "Use this seed for every scene")->each([&](const std::string&) { pin = true; });

    // grid
    auto* grid_cmd = app.add_subcommand("grid", "Render an identities x prompts evaluation grid");
    fs::path grid_prompts, grid_out, grid_celeb;
    int grid_count = 70;
    std::uint64_t grid_seed = 0;
    GridRenderOptions grid_opt;
    grid_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    grid_cmd->add_option("--checkpoint", ckpt_path, "Sample identities from this checkpoint")->check(CLI::ExistingFile);
    grid_cmd->add_option("--celeb-names", grid_celeb, "Render celeb names instead (FID reference)")
        ->check(CLI::ExistingFile);
    grid_cmd->add_option("--prompts", grid_prompts, "Evaluation prompts")->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--count", grid_count, "Number of identities")->check(CLI::PositiveNumber);
    grid_cmd->add_option("--seed", grid_seed, "Latent seed");
    grid_cmd->add_option("--render-seed", grid_opt.base_seed, "First sampler seed");
    grid_cmd->add_option("--sampler-steps", grid_opt.sampler.steps, "Sampler steps");
    grid_cmd->add_option("--out", grid_out, "Output directory (manifest.json inside)")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a rendered grid");
    fs::path eval_grid, eval_report, eval_reference;
    MetricOptions metric_opt;
    eval_cmd->add_option("--grid", eval_grid, "Grid manifest")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--reference", eval_reference, "Reference grid manifest for FID")->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", eval_report, "JSON report to write")->required();
    eval_cmd->add_option("--max-pairs", metric_opt.max_pairs, "Pair cap per identity");
    eval_cmd->add_option("--pair-seed", metric_opt.seed, "Seed of the pair subsample");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the studio HTTP service");
    StudioConfig studio_cfg;
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path static_dir;
    std::string data_dir = env_or("CHARFAC_DATA_DIR", "studio_data");
    serve_cmd->add_option("--model", model_path, "Base model file")->required()->envname("CHARFAC_BASE_MODEL");
    serve_cmd->add_option("--checkpoint", ckpt_path, "Trained checkpoint")
        ->required()
        ->envname("CHARFAC_CHECKPOINT")
        ->check(CLI::ExistingFile);
    serve_cmd->add_option("--data-dir", data_dir, "Identity and image store")->envname("CHARFAC_DATA_DIR");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port")->envname("CHARFAC_PORT");
    serve_cmd->add_option("--seed", studio_cfg.seed, "Server-side random seed");
    serve_cmd->add_option("--static", static_dir, "Serve a built UI from this directory")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*toy) {
            std::string all;
            for (const auto& t : toy_texts) all += read_file(t) + "\n";
            toy_spec.words = collect_words(all);
            const BaseModel m = make_toy_base_model(toy_spec);
            m.save(toy_out);
            std::cout << m.id() << "\n";
            return 0;
        }
        if (*eval_cmd) {
            const auto manifest = GridManifest::load(eval_grid);
            const ImageGrid grid = ImageGrid::from_manifest(manifest);
            std::vector<Image> reference;
            auto ref_paths = manifest.reference_images;
            if (!eval_reference.empty()) {
                for (const auto& c : GridManifest::load(eval_reference).cells) ref_paths.push_back(c.image);
            }
            for (const auto& p : ref_paths) reference.push_back(read_png(p));
            ReferenceImageText it;
            ReferenceFace face;
            ReferencePerceptual perc;
            ReferenceFeatures feat;
            const auto report = evaluate_grid(grid, reference, {&it, &face, &perc, &feat}, metric_opt);
            for (const auto& w : report.identity_consistency.warnings) std::cerr << "warning: " << w << "\n";
            write_file_atomically(eval_report, report.to_json());
            std::cout << report.to_json();
            return 0;
        }

        const BaseModel model = BaseModel::load(model_path);

        if (*bank_cmd) {
            const auto bank = bank_from_names(model, bank_names, bank_attr);
            bank.save(bank_out);
            std::cout << bank.size() << " names embedded\n";
            return 0;
        }
        if (*train_cmd) {
            TrainingConfig cfg = cfg_path.empty() ? TrainingConfig{} : TrainingConfig::load(cfg_path);
            if (only_adv) cfg.lambda_con = 0.0;
            if (only_con) cfg.lambda_adv = 0.0;
            if (steps_override >= 0) cfg.steps = steps_override;
            cfg.shape.dim = model.dim();
            const auto bank = bank_from_names(model, names_path, attribute);
            const auto corpus = load_prompt_corpus(prompts_path, model.text().tokenizer);
            std::cerr << corpus.size() << " prompts, placeholder positional diversity "
                      << corpus.positional_diversity() << "\n";
            const auto encoder_hash = model.text().encoder.parameter_hash();
            TrainingState state;
            if (!resume_path.empty()) {
                state = TrainingState::from_checkpoint(Checkpoint::load(resume_path));
                if (state.base_model_id != model.id()) throw MismatchError("checkpoint belongs to another base model");
                if (state.name_list_hash != bank.name_list_hash()) throw MismatchError("name list differs from checkpoint");
                if (steps_override >= 0) state.config.steps = steps_override;
            } else {
                state = init_training(cfg, bank, model.id(), corpus.hash);
            }
            TrainOptions opts;
            opts.out_dir = out_dir;
            opts.on_record = [&](const TrainingLogRecord& r) {
                if (r.step % 100 == 0 || r.step == state.config.steps) {
                    std::cerr << "step " << r.step << " loss_d " << r.loss_d << " loss_g " << r.loss_g_adv << " loss_con "
                              << r.loss_con << "\n";
                }
            };
            const auto result = train(state, bank, corpus, model.text(), opts);
            if (model.text().encoder.parameter_hash() != encoder_hash) throw Error("text encoder changed during training");
            std::cout << (out_dir / "final.cfck").string() << " " << result.final_checkpoint.id() << "\n";
            return 0;
        }
        if (*sample_cmd) {
            const auto ckpt = Checkpoint::load(ckpt_path);
            Rng rng(sample_seed);
            const auto id = sample_zero
                                ? sample_identity(ckpt, model, LatentCode(Vec::Zero(ckpt.z_dim())), now_unix())
                                : sample_identity(ckpt, model, rng, now_unix());
            save_identity(id, sample_out);
            std::cout << sample_out.string() << "\n";
            return 0;
        }
        if (*render_cmd) {
            const auto id = load_identity(identity_path, &model);
            req.identity = id.embeddings;
            req.prompt = prompt;
            write_png(render(req, model), render_out);
            std::cout << render_out.string() << "\n";
            return 0;
        }
        if (*interp_cmd) {
            const auto ckpt = Checkpoint::load(ckpt_path);
            const auto a = load_identity(interp_a, &model);
            const auto b = load_identity(interp_b, &model);
            fs::create_directories(interp_out);
            for (int k = 0; k < interp_steps; ++k) {
                const double t = static_cast<double>(k) / (interp_steps - 1);
                const auto id = sample_identity(ckpt, model, interpolate(a.latent, b.latent, t), now_unix());
                const auto path = interp_out / ("identity_" + std::to_string(k) + ".cfid");
                save_identity(id, path);
                std::cout << t << " " << path.string() << "\n";
            }
            return 0;
        }
        if (*story_cmd) {
            const auto id = load_identity(identity_path, &model);
            if (pin) story_opt.pinned_seed = pinned;
            const auto images = story_render(id.embeddings, read_lines(script_path), model, story_opt);
            fs::create_directories(story_out);
            for (std::size_t k = 0; k < images.size(); ++k) {
                const auto path = story_out / ("scene_" + std::to_string(k) + ".png");
                write_png(images[k], path);
                std::cout << path.string() << "\n";
            }
            return 0;
        }
        if (*grid_cmd) {
            const auto prompts = read_lines(grid_prompts);
            for (const auto& p : prompts) make_template(p, model.text().tokenizer);
            std::vector<std::pair<std::string, EmbeddingPair>> identities;
            if (!grid_celeb.empty()) {
                const auto bank = bank_from_names(model, grid_celeb, "");
                const auto n = std::min<std::size_t>(bank.size(), static_cast<std::size_t>(grid_count));
                for (std::size_t i = 0; i < n; ++i) identities.emplace_back(bank.names()[i].full_name(), bank.pair(i));
            } else {
                if (ckpt_path.empty()) throw Error("grid needs --checkpoint or --celeb-names");
                const auto ckpt = Checkpoint::load(ckpt_path);
                Rng rng(grid_seed);
                fs::create_directories(grid_out / "identities");
                for (int i = 0; i < grid_count; ++i) {
                    const auto id = sample_identity(ckpt, model, rng, now_unix());
                    const std::string label = "character_" + std::to_string(i);
                    save_identity(id, grid_out / "identities" / (label + ".cfid"));
                    identities.emplace_back(label, id.embeddings);
                }
            }
            const auto manifest = render_grid(identities, prompts, model, grid_out, grid_opt, prompts.front());
            manifest.save(grid_out / "manifest.json");
            std::cout << (grid_out / "manifest.json").string() << "\n";
            return 0;
        }
        if (*serve_cmd) {
            auto ckpt = std::make_shared<const Checkpoint>(Checkpoint::load(ckpt_path));
            auto shared_model = std::make_shared<const BaseModel>(model);
            studio_cfg.data_dir = data_dir;
            StudioService service(ckpt, shared_model, studio_cfg);
            StudioServer server(service, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
            g_server = &server;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            std::cerr << "studio listening on " << host << ":" << port << "\n";
            if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
            g_server = nullptr;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
