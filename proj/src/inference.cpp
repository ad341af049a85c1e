#include "charfac/inference.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/context_consistency.hpp"
#include "charfac/rng.hpp"

#include <cmath>
#include <sstream>

namespace charfac {

namespace {

constexpr std::uint32_t kIdentityVersion = 1;

void check_compatible(const Checkpoint& checkpoint, const BaseModel& model) {
    if (checkpoint.dim() != model.dim()) {
        throw MismatchError("checkpoint width " + std::to_string(checkpoint.dim()) + " does not match base model " +
                            model.id() + " width " + std::to_string(model.dim()));
    }
    if (!checkpoint.base_model_id.empty() && checkpoint.base_model_id != model.id()) {
        throw MismatchError("checkpoint was trained against " + checkpoint.base_model_id + ", not " + model.id());
    }
}

}  // namespace

PseudoIdentity sample_identity(const Checkpoint& checkpoint, const BaseModel& model, Rng& rng,
                               std::int64_t created_unix) {
    check_compatible(checkpoint, model);
    return sample_identity(checkpoint, model, LatentCode::sample(checkpoint.z_dim(), rng), created_unix);
}

PseudoIdentity sample_identity(const Checkpoint& checkpoint, const BaseModel& model, const LatentCode& z,
                               std::int64_t created_unix) {
    check_compatible(checkpoint, model);
    if (z.dim() != checkpoint.z_dim()) {
        throw MismatchError("latent code has " + std::to_string(z.dim()) + " entries, generator expects " +
                            std::to_string(checkpoint.z_dim()));
    }
    PseudoIdentity id = generate_identity(z, checkpoint.generator, checkpoint.stats);
    id.metadata.base_model_id = model.id();
    id.metadata.checkpoint_id = checkpoint.id();
    id.metadata.name_list_hash = checkpoint.name_list_hash;
    id.metadata.created_unix = created_unix;
    return id;
}

LatentCode interpolate(const LatentCode& z1, const LatentCode& z2, double t) {
    if (z1.dim() != z2.dim()) throw MismatchError("interpolate: latent codes differ in length");
    if (!(t >= 0.0 && t <= 1.0)) throw Error("interpolate: t must lie in [0, 1]");
    return LatentCode(Vec((1.0 - t) * z1.values + t * z2.values));
}

void RenderRequest::validate(const BaseModel& model) const {
    if (!(sampler.guidance_scale >= 1.0)) throw Error("render: guidance scale must be >= 1");
    if (sampler.steps < 1) throw Error("render: sampler steps must be >= 1");
    if (image_size < 0) throw Error("render: image size must be >= 0");
    if (identity.dim() != model.dim()) {
        throw MismatchError("identity width " + std::to_string(identity.dim()) + " does not match base model width " +
                            std::to_string(model.dim()));
    }
    make_template(prompt, model.text().tokenizer);
}

Image render(const RenderRequest& request, const BaseModel& model) {
    request.validate(model);
    const auto& text = model.text();
    const auto tokens = tokenize_template(make_template(request.prompt, text.tokenizer), text.tokenizer);
    const Mat cond = text.encoder.transform(substitute_identity(tokens, request.identity, text));
    const Mat uncond = encode_text("", text);
    Image img = model.diffusion().generate(cond, uncond, request.sampler, request.seed);
    if (request.image_size != 0 && request.image_size != img.width) {
        img = img.resized(request.image_size, request.image_size);
    }
    return img;
}

std::vector<Image> story_render(const EmbeddingPair& identity, const std::vector<std::string>& prompts,
                                const BaseModel& model, const StoryOptions& options) {
    if (prompts.empty()) throw StoryError("story has no prompts", {});
    std::vector<RenderRequest> requests;
    std::vector<std::size_t> failed;
    std::string report;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        RenderRequest r;
        r.identity = identity;
        r.prompt = prompts[i];
        r.sampler = options.sampler;
        r.image_size = options.image_size;
        r.seed = options.pinned_seed ? *options.pinned_seed : options.base_seed + i;
        try {
            r.validate(model);
        } catch (const Error& e) {
            failed.push_back(i);
            report += "\n  prompt " + std::to_string(i) + ": " + e.what();
        }
        requests.push_back(std::move(r));
    }
    if (!failed.empty()) {
        throw StoryError(std::to_string(failed.size()) + " of " + std::to_string(prompts.size()) +
                             " story prompts are invalid:" + report,
                         failed);
    }
    std::vector<Image> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(render(r, model));
    return out;
}

void save_identity(const PseudoIdentity& identity, const std::filesystem::path& path) {
    std::ostringstream os;
    BinaryWriter w(os);
    w.magic("CFID");
    w.u32(kIdentityVersion);
    w.str(identity.metadata.base_model_id);
    w.str(identity.metadata.checkpoint_id);
    w.str(identity.metadata.name_list_hash);
    w.u64(static_cast<std::uint64_t>(identity.metadata.created_unix));
    w.u64(static_cast<std::uint64_t>(identity.embeddings.dim()));
    w.vec(identity.embeddings.values);
    w.vec(identity.latent.values);
    write_file_atomically(path, os.str());
}

PseudoIdentity load_identity(const std::filesystem::path& path, const BaseModel* model) {
    std::istringstream is(read_file(path));
    BinaryReader r(is, path.string());
    r.expect_magic("CFID");
    if (const auto v = r.u32(); v != kIdentityVersion) {
        throw FormatError(path.string() + ": unsupported identity file version " + std::to_string(v));
    }
    PseudoIdentity id;
    id.metadata.base_model_id = r.str();
    id.metadata.checkpoint_id = r.str();
    id.metadata.name_list_hash = r.str();
    id.metadata.created_unix = static_cast<std::int64_t>(r.u64());
    const auto d = r.u64();
    id.embeddings = EmbeddingPair(r.vec());
    id.latent = LatentCode(r.vec());
    if (static_cast<std::uint64_t>(id.embeddings.values.size()) != 2 * d) {
        throw FormatError(path.string() + ": embedding block does not hold two vectors of width " + std::to_string(d));
    }
    if (model) {
        if (id.metadata.base_model_id != model->id()) {
            throw MismatchError(path.string() + " was made for base model " + id.metadata.base_model_id +
                                ", refusing to use it with " + model->id());
        }
        if (static_cast<std::uint64_t>(model->dim()) != d) {
            throw MismatchError(path.string() + ": identity width " + std::to_string(d) +
                                " does not match the base model");
        }
    }
    return id;
}

}  // namespace charfac
