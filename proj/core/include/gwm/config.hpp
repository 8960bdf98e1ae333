#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gwm/decoder_client.hpp"
#include "gwm/token_mp.hpp"

namespace gwm {

// Runtime configuration: a flat JSON object of documented keys; unknown keys
// are rejected. Flag overrides win over the file.
struct Config {
    // embedding widths per modality and decoder token widths
    EmbedderDims dims;
    std::size_t decoder_text_dim = 4096;
    std::size_t decoder_image_dim = 768;

    std::size_t hops = 4;

    // unintended-action retrieval
    std::size_t retrieve_k = 5;
    bool retrieve_text_only = false;
    std::size_t retrieve_expand_hops = 0;

    // implicit-edge construction; deliberately no defaults
    std::optional<std::size_t> knn_k;
    std::optional<double> knn_threshold;
    std::string knn_modality = "text";

    std::size_t budget_max_tokens = 2048;
    std::string budget_tokenizer = "whitespace";  // whitespace | chars_over_4

    std::string decoder_url;  // empty: in-process deterministic mock
    int decoder_timeout_ms = 5000;
    int decoder_retries = 2;
    int decoder_backoff_ms = 100;
    bool decoder_accepts_graph_tokens = true;

    std::uint64_t mock_seed = 0;
    std::uint64_t projector_seed = 7;

    bool allow_self_loops = false;
    bool adjacency_weighted = false;

    TokenBudget budget() const;

    static Config load_file(const std::string& path);
    // Applies "key=value" pairs using the file key names.
    void apply_override(const std::string& key, const std::string& value);
};

} // namespace gwm
