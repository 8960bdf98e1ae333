#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "gwm/decoder_client.hpp"
#include "gwm/stable_hash.hpp"

#include "httplib.h"
#include "json.hpp"

namespace gwm {

namespace {

using nlohmann::json;

json tokens_to_json(const std::vector<std::vector<double>>& tokens) {
    json arr = json::array();
    for (const auto& t : tokens) {
        arr.push_back(json(t));
    }
    return arr;
}

// Textual fallback for services that cannot ingest soft tokens.
std::string inline_tokens(const std::vector<std::vector<double>>& tokens) {
    std::ostringstream os;
    os << "\nGRAPH_TOKENS " << tokens.size() << "x" << (tokens.empty() ? 0 : tokens[0].size());
    os.precision(6);
    for (const auto& t : tokens) {
        os << "\n";
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i) os << ' ';
            os << t[i];
        }
    }
    return os.str();
}

} // namespace

struct HttpDecoderClient::Impl {
    HttpDecoderConfig config;
    httplib::Client client;
    std::atomic<std::uint64_t> request_counter{0};

    explicit Impl(HttpDecoderConfig cfg) : config(std::move(cfg)), client(config.url) {
        client.set_connection_timeout(0, config.timeout_ms * 1000);
        client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
        client.set_write_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
    }

    // One logical request; the id is reused across retries so the server can
    // treat resends as idempotent.
    json post(const std::string& path, const json& body, std::string& request_id_out) {
        const std::uint64_t ticket = request_counter.fetch_add(1);
        request_id_out = hex64(fnv1a64(body.dump()) ^ splitmix64(ticket));
        httplib::Headers headers = {{"X-Request-Id", request_id_out}};

        int backoff = config.backoff_ms;
        bool overloaded = false;
        for (int attempt = 0; attempt <= config.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
            auto res = client.Post(path, headers, body.dump(), "application/json");
            if (!res) {
                overloaded = false;
                continue;  // connection-level failure: retry
            }
            if (res->status == 429) {
                overloaded = true;
                continue;
            }
            if (res->status >= 500) {
                overloaded = false;
                continue;
            }
            if (res->status != 200) {
                raise(Errc::BadResponse,
                      path + " returned status " + std::to_string(res->status));
            }
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) {
                raise(Errc::BadResponse, path + " returned non-JSON body");
            }
            return parsed;
        }
        if (overloaded) {
            raise(Errc::Overloaded, path + " kept returning 429");
        }
        raise(Errc::DecoderUnavailable,
              config.url + path + " unreachable after " + std::to_string(config.retries + 1) +
                  " attempts");
    }
};

HttpDecoderClient::HttpDecoderClient(HttpDecoderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpDecoderClient::~HttpDecoderClient() = default;

DecoderResponse HttpDecoderClient::complete(const CompleteRequest& req) {
    json body;
    body["prompt"] = req.prompt;
    body["max_tokens"] = req.max_tokens;
    bool inlined = false;
    if (req.graph_tokens) {
        if (impl_->config.accepts_graph_tokens) {
            body["graph_tokens"] = tokens_to_json(*req.graph_tokens);
        } else {
            body["prompt"] = req.prompt + inline_tokens(*req.graph_tokens);
            inlined = true;
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    DecoderResponse resp;
    json parsed = impl_->post("/v1/complete", body, resp.request_id);
    if (!parsed.contains("text") || !parsed["text"].is_string()) {
        raise(Errc::BadResponse, "complete response lacks string field 'text'");
    }
    resp.text = parsed["text"].get<std::string>();
    resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    resp.service_id = impl_->config.url;
    resp.graph_tokens_inlined = inlined;
    return resp;
}

DecoderResponse HttpDecoderClient::generate_image(const GenerateImageRequest& req) {
    json body;
    body["prompt"] = req.prompt;
    bool inlined = false;
    if (req.condition_tokens) {
        if (impl_->config.accepts_graph_tokens) {
            body["condition_tokens"] = tokens_to_json(*req.condition_tokens);
        } else {
            body["prompt"] = req.prompt + inline_tokens(*req.condition_tokens);
            inlined = true;
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    DecoderResponse resp;
    json parsed = impl_->post("/v1/generate_image", body, resp.request_id);
    if (!parsed.contains("image_ref") || !parsed["image_ref"].is_string()) {
        raise(Errc::BadResponse, "generate_image response lacks string field 'image_ref'");
    }
    resp.image_ref = parsed["image_ref"].get<std::string>();
    resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    resp.service_id = impl_->config.url;
    resp.graph_tokens_inlined = inlined;
    return resp;
}

DecoderResponse HttpDecoderClient::embed(const EmbedRequest& req) {
    json body;
    body["modality"] = req.modality;
    body["content"] = req.content;
    const auto t0 = std::chrono::steady_clock::now();
    DecoderResponse resp;
    json parsed = impl_->post("/v1/embed", body, resp.request_id);
    if (!parsed.contains("vector") || !parsed["vector"].is_array()) {
        raise(Errc::BadResponse, "embed response lacks array field 'vector'");
    }
    resp.vector.reserve(parsed["vector"].size());
    for (const auto& v : parsed["vector"]) {
        if (!v.is_number()) {
            raise(Errc::BadResponse, "embed vector carries a non-numeric entry");
        }
        resp.vector.push_back(v.get<double>());
    }
    resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    resp.service_id = impl_->config.url;
    return resp;
}

} // namespace gwm
