#pragma once

#include "charfac/studio_service.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace charfac {

/// HTTP routes for StudioService. Optionally serves a static UI bundle at /.
class StudioServer {
public:
    explicit StudioServer(StudioService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~StudioServer();

    /// Binds an ephemeral port and returns it; call listen_after_bind next.
    int bind_any_port(const std::string& host = "127.0.0.1");
    bool listen_after_bind();
    /// Blocks serving requests until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace charfac
