#include "charfac/studio_service.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/context_consistency.hpp"
#include "charfac/hashing.hpp"
#include "charfac/image.hpp"
#include "charfac/inference.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace charfac {

namespace {

using nlohmann::json;

constexpr int kStoreVersion = 1;

ApiResponse error_response(int status, const std::string& message) { return {status, json{{"error", message}}}; }

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec json_vec(const json& a) {
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

std::int64_t now_unix() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

/// Parses an optional non-negative integer seed; nullopt when absent.
std::optional<std::uint64_t> parse_seed(const json& body) {
    if (!body.contains("seed") || body.at("seed").is_null()) return std::nullopt;
    const auto& s = body.at("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) throw std::invalid_argument("seed must be a non-negative integer");
    return s.get<std::uint64_t>();
}

}  // namespace

StudioService::StudioService(std::shared_ptr<const Checkpoint> checkpoint, std::shared_ptr<const BaseModel> model,
                             StudioConfig config)
    : checkpoint_(std::move(checkpoint)), model_(std::move(model)), config_(std::move(config)), rng_(config_.seed) {
    if (!checkpoint_ || !model_) throw Error("studio: checkpoint and base model are required");
    if (checkpoint_->dim() != model_->dim() ||
        (!checkpoint_->base_model_id.empty() && checkpoint_->base_model_id != model_->id())) {
        throw MismatchError("studio: checkpoint (trained against '" + checkpoint_->base_model_id +
                            "') does not fit base model '" + model_->id() + "'");
    }
    make_template(config_.preview_prompt, model_->text().tokenizer);
    std::filesystem::create_directories(config_.data_dir / "images");
    std::filesystem::create_directories(config_.data_dir / "identities");
    load_store();
    if (config_.start_worker) worker_ = std::thread([this] { worker_loop(); });
}

StudioService::~StudioService() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    queue_ready_.notify_all();
    if (worker_.joinable()) worker_.join();
}

std::string StudioService::new_id(const char* prefix) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06llu", prefix, static_cast<unsigned long long>(++counter_));
    return buf;
}

std::string StudioService::enqueue_locked(const std::string& identity, const std::string& prompt,
                                          std::uint64_t seed) {
    const auto id = new_id("j");
    JobRecord j;
    j.identity = identity;
    j.prompt = prompt;
    j.seed = seed;
    jobs_.emplace(id, j);
    queue_.push_back(id);
    queue_ready_.notify_one();
    return id;
}

std::string StudioService::store_identity_locked(PseudoIdentity identity, const std::string& origin,
                                                 std::optional<std::uint64_t> preview_seed) {
    const auto id = new_id("c");
    save_identity(identity, config_.data_dir / "identities" / (id + ".cfid"));
    IdentityRecord r;
    r.identity = std::move(identity);
    r.origin = origin;
    r.preview_job = enqueue_locked(id, config_.preview_prompt, preview_seed ? *preview_seed : rng_.next_u64());
    identities_.emplace(id, std::move(r));
    return id;
}

json StudioService::identity_json_locked(const std::string& id, const IdentityRecord& r) const {
    const auto& m = r.identity.metadata;
    return json{{"id", id},
                {"origin", r.origin},
                {"preview_job", r.preview_job},
                {"created_unix", m.created_unix},
                {"base_model_id", m.base_model_id},
                {"checkpoint_id", m.checkpoint_id},
                {"name_list_hash", m.name_list_hash},
                {"latent", vec_json(r.identity.latent.values)},
                {"embeddings", vec_json(r.identity.embeddings.values)}};
}

json StudioService::job_json_locked(const std::string& id, const JobRecord& j) const {
    json out{{"id", id}, {"status", j.status}, {"identity", j.identity}, {"prompt", j.prompt}, {"seed", j.seed}};
    if (j.status == "done") out["image_url"] = "/jobs/" + id + "/image";
    if (!j.image.empty()) out["image"] = j.image;
    if (!j.error.empty()) out["error"] = j.error;
    return out;
}

void StudioService::persist_locked() const {
    json doc;
    doc["version"] = kStoreVersion;
    doc["base_model_id"] = model_->id();
    doc["checkpoint_id"] = checkpoint_->id();
    doc["counter"] = counter_;
    doc["rng_state"] = rng_.save_state();
    doc["identities"] = json::object();
    for (const auto& [id, r] : identities_) doc["identities"][id] = identity_json_locked(id, r);
    doc["jobs"] = json::object();
    for (const auto& [id, j] : jobs_) {
        doc["jobs"][id] = json{{"identity", j.identity}, {"prompt", j.prompt}, {"seed", j.seed},
                               {"status", j.status},     {"image", j.image},   {"error", j.error}};
    }
    write_file_atomically(config_.data_dir / "store.json", doc.dump(1));
}

void StudioService::load_store() {
    const auto path = config_.data_dir / "store.json";
    if (!std::filesystem::exists(path)) return;
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (doc.value("version", 0) != kStoreVersion) throw FormatError(path.string() + ": unsupported store version");
    if (doc.at("base_model_id").get<std::string>() != model_->id()) {
        throw MismatchError(path.string() + " belongs to base model " + doc.at("base_model_id").get<std::string>());
    }
    counter_ = doc.at("counter").get<std::uint64_t>();
    rng_.load_state(doc.at("rng_state").get<std::string>());
    for (const auto& [id, j] : doc.at("identities").items()) {
        IdentityRecord r;
        r.identity.embeddings = EmbeddingPair(json_vec(j.at("embeddings")));
        r.identity.latent = LatentCode(json_vec(j.at("latent")));
        r.identity.metadata.base_model_id = j.at("base_model_id").get<std::string>();
        r.identity.metadata.checkpoint_id = j.at("checkpoint_id").get<std::string>();
        r.identity.metadata.name_list_hash = j.at("name_list_hash").get<std::string>();
        r.identity.metadata.created_unix = j.at("created_unix").get<std::int64_t>();
        r.preview_job = j.at("preview_job").get<std::string>();
        r.origin = j.at("origin").get<std::string>();
        identities_.emplace(id, std::move(r));
    }
    for (const auto& [id, j] : doc.at("jobs").items()) {
        JobRecord r;
        r.identity = j.at("identity").get<std::string>();
        r.prompt = j.at("prompt").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.status = j.at("status").get<std::string>();
        r.image = j.at("image").get<std::string>();
        r.error = j.at("error").get<std::string>();
        if (r.status == "queued" || r.status == "running") {
            r.status = "queued";
            queue_.push_back(id);
        }
        jobs_.emplace(id, std::move(r));
    }
}

void StudioService::log_request(const std::string& endpoint, const json& body, const json& result) const {
    std::ofstream log(config_.data_dir / "requests.jsonl", std::ios::app);
    log << json{{"endpoint", endpoint}, {"body", body}, {"result", result}}.dump() << '\n';
}

ApiResponse StudioService::sample(const json& body) {
    std::optional<LatentCode> z;
    std::optional<std::uint64_t> seed;
    try {
        if (!body.is_null() && !body.is_object()) throw std::invalid_argument("body must be a JSON object");
        if (body.is_object() && body.contains("latent") && !body.at("latent").is_null()) {
            const auto& a = body.at("latent");
            if (!a.is_array()) throw std::invalid_argument("latent must be an array of numbers");
            if (static_cast<Eigen::Index>(a.size()) != checkpoint_->z_dim()) {
                throw std::invalid_argument("latent must have " + std::to_string(checkpoint_->z_dim()) + " entries, got " +
                                            std::to_string(a.size()));
            }
            for (const auto& x : a) {
                if (!x.is_number() || !std::isfinite(x.get<double>())) {
                    throw std::invalid_argument("latent entries must be finite numbers");
                }
            }
            z = LatentCode(json_vec(a));
        }
        if (body.is_object()) seed = parse_seed(body);
    } catch (const std::exception& e) {
        return error_response(400, e.what());
    }
    std::lock_guard lock(mutex_);
    try {
        const LatentCode code = z ? *z : LatentCode::sample(checkpoint_->z_dim(), rng_);
        PseudoIdentity identity = sample_identity(*checkpoint_, *model_, code, now_unix());
        const auto id = store_identity_locked(std::move(identity), "sample", seed);
        persist_locked();
        json out{{"id", id}, {"preview_job", identities_.at(id).preview_job}};
        log_request("POST /identities/sample", body, out);
        return {201, out};
    } catch (const MismatchError& e) {
        return error_response(409, e.what());
    }
}

ApiResponse StudioService::interpolate(const json& body) {
    std::string a, b;
    double t = 0.0;
    try {
        if (!body.is_object()) throw std::invalid_argument("body must be a JSON object");
        a = body.at("id_a").get<std::string>();
        b = body.at("id_b").get<std::string>();
        if (!body.at("t").is_number()) throw std::invalid_argument("t must be a number");
        t = body.at("t").get<double>();
    } catch (const std::exception& e) {
        return error_response(400, std::string("expected {id_a, id_b, t}: ") + e.what());
    }
    std::lock_guard lock(mutex_);
    const auto ia = identities_.find(a);
    const auto ib = identities_.find(b);
    if (ia == identities_.end()) return error_response(404, "unknown identity '" + a + "'");
    if (ib == identities_.end()) return error_response(404, "unknown identity '" + b + "'");
    try {
        const LatentCode z = charfac::interpolate(ia->second.identity.latent, ib->second.identity.latent, t);
        PseudoIdentity identity = sample_identity(*checkpoint_, *model_, z, now_unix());
        const auto id = store_identity_locked(std::move(identity), "interpolate", std::nullopt);
        persist_locked();
        json out{{"id", id}, {"preview_job", identities_.at(id).preview_job}};
        log_request("POST /identities/interpolate", body, out);
        return {201, out};
    } catch (const MismatchError& e) {
        return error_response(409, e.what());
    } catch (const Error& e) {
        return error_response(400, e.what());
    }
}

ApiResponse StudioService::render(const json& body) {
    std::string identity, prompt;
    std::optional<std::uint64_t> seed;
    try {
        if (!body.is_object()) throw std::invalid_argument("body must be a JSON object");
        identity = body.at("identity").get<std::string>();
        prompt = body.at("prompt").get<std::string>();
        seed = parse_seed(body);
    } catch (const std::exception& e) {
        return error_response(400, std::string("expected {identity, prompt, seed?}: ") + e.what());
    }
    try {
        make_template(prompt, model_->text().tokenizer);
    } catch (const PromptError& e) {
        return error_response(422, e.what());
    }
    std::lock_guard lock(mutex_);
    if (!identities_.contains(identity)) return error_response(404, "unknown identity '" + identity + "'");
    const auto job = enqueue_locked(identity, prompt, seed ? *seed : rng_.next_u64());
    persist_locked();
    json out{{"job", job}, {"seed", jobs_.at(job).seed}};
    log_request("POST /render", body, out);
    return {202, out};
}

ApiResponse StudioService::job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return error_response(404, "unknown job '" + id + "'");
    return {200, job_json_locked(id, it->second)};
}

std::optional<std::filesystem::path> StudioService::job_image(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end() || it->second.status != "done") return std::nullopt;
    return config_.data_dir / "images" / it->second.image;
}

ApiResponse StudioService::list_identities() const {
    std::lock_guard lock(mutex_);
    json list = json::array();
    for (const auto& [id, r] : identities_) {
        json j = identity_json_locked(id, r);
        j.erase("embeddings");
        list.push_back(std::move(j));
    }
    return {200, json{{"identities", list}}};
}

ApiResponse StudioService::get_identity(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = identities_.find(id);
    if (it == identities_.end()) return error_response(404, "unknown identity '" + id + "'");
    return {200, identity_json_locked(id, it->second)};
}

ApiResponse StudioService::delete_identity(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = identities_.find(id);
    if (it == identities_.end()) return error_response(404, "unknown identity '" + id + "'");
    identities_.erase(it);
    std::error_code ec;
    std::filesystem::remove(config_.data_dir / "identities" / (id + ".cfid"), ec);
    persist_locked();
    log_request("DELETE /identities/" + id, json(), json{{"deleted", id}});
    return {200, json{{"deleted", id}}};
}

bool StudioService::run_one() {
    std::string job_id;
    RenderRequest request;
    {
        std::lock_guard lock(mutex_);
        if (queue_.empty()) return false;
        job_id = queue_.front();
        queue_.pop_front();
        auto& j = jobs_.at(job_id);
        const auto ident = identities_.find(j.identity);
        if (ident == identities_.end()) {
            j.status = "failed";
            j.error = "identity '" + j.identity + "' was deleted before rendering";
            persist_locked();
            job_changed_.notify_all();
            return true;
        }
        j.status = "running";
        request.identity = ident->second.identity.embeddings;
        request.prompt = j.prompt;
        request.seed = j.seed;
        request.sampler = config_.sampler;
        job_changed_.notify_all();
    }
    std::string image_name, error;
    try {
        const Image img = charfac::render(request, *model_);
        image_name = job_id + ".png";
        const auto final_path = config_.data_dir / "images" / image_name;
        const auto tmp = final_path.string() + ".tmp";
        write_png(img, tmp);
        std::filesystem::rename(tmp, final_path);
    } catch (const std::exception& e) {
        error = e.what();
    }
    std::lock_guard lock(mutex_);
    auto& j = jobs_.at(job_id);
    j.status = error.empty() ? "done" : "failed";
    j.image = image_name;
    j.error = error;
    persist_locked();
    job_changed_.notify_all();
    return true;
}

void StudioService::drain() {
    while (run_one()) {
    }
}

void StudioService::wait_for(const std::string& job_id) const {
    std::unique_lock lock(mutex_);
    job_changed_.wait(lock, [&] {
        const auto it = jobs_.find(job_id);
        return it == jobs_.end() || (it->second.status != "queued" && it->second.status != "running");
    });
}

void StudioService::worker_loop() {
    for (;;) {
        {
            std::unique_lock lock(mutex_);
            queue_ready_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
        }
        run_one();
    }
}

}  // namespace charfac
