#include <thread>

#include "gwm/decoder_client.hpp"

#include "httplib.h"
#include "json.hpp"

namespace gwm {

namespace {

using nlohmann::json;

void write_error(httplib::Response& res, int status, const std::string& message) {
    json body;
    body["error"] = message;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

} // namespace

struct MockDecoderServer::Impl {
    std::uint64_t seed;
    EmbedderDims dims;
    httplib::Server server;
    std::thread worker;
    int port = 0;

    Impl(std::uint64_t s, EmbedderDims d) : seed(s), dims(d) { install_routes(); }

    void install_routes() {
        server.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
                write_error(res, 400, "complete expects {prompt, max_tokens, graph_tokens?}");
                return;
            }
            json out;
            out["text"] = mock_complete_text(body["prompt"].get<std::string>());
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/v1/generate_image", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
                write_error(res, 400, "generate_image expects {prompt, condition_tokens?}");
                return;
            }
            json out;
            out["image_ref"] = mock_image_ref(body["prompt"].get<std::string>());
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("modality") || !body.contains("content") ||
                !body["modality"].is_string() || !body["content"].is_string()) {
                write_error(res, 400, "embed expects {modality, content}");
                return;
            }
            const std::string modality = body["modality"].get<std::string>();
            if (modality != "text" && modality != "image" && modality != "table") {
                write_error(res, 400, "modality must be text|image|table");
                return;
            }
            json out;
            out["vector"] =
                mock_embed_vector(modality, body["content"].get<std::string>(), seed,
                                  dims.dim_for(modality));
            res.set_content(out.dump(), "application/json");
        });
    }
};

MockDecoderServer::MockDecoderServer(std::uint64_t seed, EmbedderDims dims)
    : impl_(std::make_unique<Impl>(seed, dims)) {}

MockDecoderServer::~MockDecoderServer() { stop(); }

int MockDecoderServer::start(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            raise(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void MockDecoderServer::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
    if (impl_ && impl_->worker.joinable()) {
        impl_->worker.join();
    }
}

bool MockDecoderServer::serve_forever(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

} // namespace gwm
