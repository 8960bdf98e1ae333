#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gwm/errors.hpp"

namespace gwm {

// Wire-level messages to external LLM / image-generation / embedding
// services. Soft graph tokens ride along as float arrays.

struct CompleteRequest {
    std::string prompt;
    std::size_t max_tokens = 2048;
    std::optional<std::vector<std::vector<double>>> graph_tokens;
};

struct GenerateImageRequest {
    std::string prompt;
    std::optional<std::vector<std::vector<double>>> condition_tokens;
};

struct EmbedRequest {
    std::string modality;  // "text" | "image" | "table"
    std::string content;
};

using DecoderRequest = std::variant<CompleteRequest, GenerateImageRequest, EmbedRequest>;

struct DecoderResponse {
    std::string text;                 // Complete
    std::string image_ref;            // GenerateImage
    std::vector<double> vector;       // Embed
    double latency_ms = 0.0;
    std::string service_id;
    std::string request_id;
    bool graph_tokens_inlined = false;  // soft tokens were serialized into the prompt text
};

class DecoderClient {
public:
    virtual ~DecoderClient() = default;

    virtual DecoderResponse complete(const CompleteRequest& req) = 0;
    virtual DecoderResponse generate_image(const GenerateImageRequest& req) = 0;
    virtual DecoderResponse embed(const EmbedRequest& req) = 0;

    // Image-to-text. Rides the completion endpoint with a "CAPTION:" prompt.
    virtual std::string caption(const std::string& image_ref);
};

// Per-modality embedding widths served by a client.
struct EmbedderDims {
    std::size_t image = 512;
    std::size_t text = 768;
    std::size_t table = 768;

    std::size_t dim_for(const std::string& modality) const;
    std::size_t total() const { return image + text + table; }
};

// ---- deterministic in-process mock -----------------------------------------
//
// Responses are pure functions of the request plus a configured seed: no
// clocks, no ambient randomness, identical bytes across platforms.
//   embed(modality, content)  -> unit-norm vector from repeated stable hashing
//   complete("...ANSWER:x")   -> "x"
//   complete("CAPTION:ref")   -> "MOCK_CAPTION:ref"
//   complete(anything else)   -> "MOCK_COMPLETION:" + prompt digest
//   generate_image(prompt)    -> "mockimg-" + prompt content hash

std::vector<double> mock_embed_vector(const std::string& modality, const std::string& content,
                                      std::uint64_t seed, std::size_t dim);
std::string mock_complete_text(const std::string& prompt);
std::string mock_image_ref(const std::string& prompt);

class MockDecoderClient : public DecoderClient {
public:
    explicit MockDecoderClient(std::uint64_t seed = 0, EmbedderDims dims = {})
        : seed_(seed), dims_(dims) {}

    DecoderResponse complete(const CompleteRequest& req) override;
    DecoderResponse generate_image(const GenerateImageRequest& req) override;
    DecoderResponse embed(const EmbedRequest& req) override;

private:
    std::uint64_t seed_;
    EmbedderDims dims_;
};

// ---- HTTP client ------------------------------------------------------------
//
// POST {url}/v1/complete        {prompt, max_tokens, graph_tokens?} -> {text}
// POST {url}/v1/generate_image  {prompt, condition_tokens?}         -> {image_ref}
// POST {url}/v1/embed           {modality, content}                 -> {vector}

struct HttpDecoderConfig {
    std::string url;                    // e.g. "http://127.0.0.1:8787"
    int timeout_ms = 5000;
    int retries = 2;                    // additional attempts after the first
    int backoff_ms = 100;               // doubled per retry
    bool accepts_graph_tokens = true;   // false: inline tokens into the prompt text
};

class HttpDecoderClient : public DecoderClient {
public:
    explicit HttpDecoderClient(HttpDecoderConfig config);
    ~HttpDecoderClient() override;

    DecoderResponse complete(const CompleteRequest& req) override;
    DecoderResponse generate_image(const GenerateImageRequest& req) override;
    DecoderResponse embed(const EmbedRequest& req) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---- mock HTTP service --------------------------------------------------------
//
// Serves the three endpoints with the mock logic above; `gwm mock-serve`
// wraps this, and the HTTP client tests run against it in-process.
class MockDecoderServer {
public:
    explicit MockDecoderServer(std::uint64_t seed = 0, EmbedderDims dims = {});
    ~MockDecoderServer();

    // Binds and serves on a background thread. port 0 picks a free port.
    // Returns the bound port.
    int start(const std::string& host, int port);
    void stop();

    // Blocking serve for the CLI.
    bool serve_forever(const std::string& host, int port);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace gwm
