#pragma once

#include "charfac/base_model.hpp"
#include "charfac/checkpoint.hpp"
#include "charfac/diffusion.hpp"
#include "charfac/ide_gan.hpp"
#include "charfac/rng.hpp"

#include "json.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace charfac {

struct StudioConfig {
    std::filesystem::path data_dir = "studio_data";
    std::uint64_t seed = 0;
    SamplerSettings sampler;
    std::string preview_prompt = "a photo of {ID}";
    /// Start the background render worker; tests may drive jobs by hand.
    bool start_worker = true;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Transport-free implementation of the studio JSON API.
///
/// Holds a read-only checkpoint and base model. Identities and job records
/// live in one JSON document under the data directory; images are PNG files
/// beside it. Every random choice (latent codes, render seeds) comes from a
/// seeded server-side Rng and is recorded, so the request log plus the
/// checkpoint reproduce every result.
class StudioService {
public:
    StudioService(std::shared_ptr<const Checkpoint> checkpoint, std::shared_ptr<const BaseModel> model,
                  StudioConfig config);
    ~StudioService();
    StudioService(const StudioService&) = delete;
    StudioService& operator=(const StudioService&) = delete;

    ApiResponse sample(const nlohmann::json& body);
    ApiResponse interpolate(const nlohmann::json& body);
    ApiResponse render(const nlohmann::json& body);
    ApiResponse job(const std::string& id) const;
    ApiResponse list_identities() const;
    ApiResponse get_identity(const std::string& id) const;
    ApiResponse delete_identity(const std::string& id);

    /// Path of a finished job's image, if any.
    std::optional<std::filesystem::path> job_image(const std::string& id) const;

    /// Runs queued jobs on the calling thread until the queue is empty.
    void drain();
    /// Blocks until the job leaves the queued/running states.
    void wait_for(const std::string& job_id) const;

    const std::filesystem::path& data_dir() const { return config_.data_dir; }

private:
    struct IdentityRecord {
        PseudoIdentity identity;
        std::string preview_job;
        std::string origin;  // "sample" or "interpolate"
    };
    struct JobRecord {
        std::string identity;
        std::string prompt;
        std::uint64_t seed = 0;
        std::string status = "queued";
        std::string image;  // file name under images/
        std::string error;
    };

    std::string new_id(const char* prefix);
    std::string enqueue_locked(const std::string& identity, const std::string& prompt, std::uint64_t seed);
    std::string store_identity_locked(PseudoIdentity identity, const std::string& origin,
                                      std::optional<std::uint64_t> preview_seed);
    nlohmann::json identity_json_locked(const std::string& id, const IdentityRecord& r) const;
    nlohmann::json job_json_locked(const std::string& id, const JobRecord& j) const;
    void persist_locked() const;
    void load_store();
    void log_request(const std::string& endpoint, const nlohmann::json& body, const nlohmann::json& result) const;
    bool run_one();
    void worker_loop();

    std::shared_ptr<const Checkpoint> checkpoint_;
    std::shared_ptr<const BaseModel> model_;
    StudioConfig config_;

    mutable std::mutex mutex_;
    mutable std::condition_variable job_changed_;
    std::condition_variable queue_ready_;
    Rng rng_;
    std::uint64_t counter_ = 0;
    std::map<std::string, IdentityRecord> identities_;
    std::map<std::string, JobRecord> jobs_;
    std::deque<std::string> queue_;
    bool stopping_ = false;
    std::thread worker_;
};

}  // namespace charfac
