#include "charfac/studio_server.hpp"

#include "charfac/binary_io.hpp"

#include "httplib.h"

namespace charfac {

namespace {

using nlohmann::json;

void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

/// Empty bodies count as null; anything else must parse.
std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return json();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        send(res, {400, json{{"error", std::string("malformed JSON body: ") + e.what()}}});
        return std::nullopt;
    }
}

}  // namespace

struct StudioServer::Impl {
    StudioService& service;
    httplib::Server http;

    explicit Impl(StudioService& s) : service(s) {}
};

StudioServer::StudioServer(StudioService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto& http = impl_->http;
    auto& svc = impl_->service;

    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    http.Post("/identities/sample", [&svc](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, svc.sample(*body));
    });
    http.Post("/identities/interpolate", [&svc](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, svc.interpolate(*body));
    });
    http.Post("/render", [&svc](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, svc.render(*body));
    });
    http.Get(R"(/jobs/([^/]+)/image)", [&svc](const httplib::Request& req, httplib::Response& res) {
        const auto path = svc.job_image(req.matches[1]);
        if (!path) {
            send(res, {404, json{{"error", "no finished image for job '" + std::string(req.matches[1]) + "'"}}});
            return;
        }
        res.set_content(read_file(*path), "image/png");
    });
    http.Get(R"(/jobs/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.job(req.matches[1]));
    });
    http.Get("/identities", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.list_identities()); });
    http.Get(R"(/identities/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_identity(req.matches[1]));
    });
    http.Delete(R"(/identities/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.delete_identity(req.matches[1]));
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"error", msg}}.dump(), "application/json");
    });
    if (static_dir) {
        if (!http.set_mount_point("/", static_dir->string())) {
            throw Error("studio: static directory " + static_dir->string() + " does not exist");
        }
    }
}

StudioServer::~StudioServer() { stop(); }

int StudioServer::bind_any_port(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool StudioServer::listen_after_bind() { return impl_->http.listen_after_bind(); }

bool StudioServer::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

void StudioServer::stop() {
    if (impl_) impl_->http.stop();
}

}  // namespace charfac
