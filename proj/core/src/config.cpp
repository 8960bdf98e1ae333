#include "gwm/config.hpp"

#include <fstream>

#include "json.hpp"

namespace gwm {

namespace {

using nlohmann::json;

std::size_t as_positive_size(const json& v, const std::string& key) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
        raise(Errc::InvalidConfigValue, "'" + key + "' must be a positive integer");
    }
    return v.get<std::size_t>();
}

std::size_t as_size(const json& v, const std::string& key) {
    if (!v.is_number_unsigned()) {
        raise(Errc::InvalidConfigValue, "'" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) {
        raise(Errc::InvalidConfigValue, "'" + key + "' must be a boolean");
    }
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) {
        raise(Errc::InvalidConfigValue, "'" + key + "' must be a string");
    }
    return v.get<std::string>();
}

void apply_key(Config& cfg, const std::string& key, const json& value) {
    if (key == "dims.image") {
        cfg.dims.image = as_positive_size(value, key);
    } else if (key == "dims.text") {
        cfg.dims.text = as_positive_size(value, key);
    } else if (key == "dims.table") {
        cfg.dims.table = as_positive_size(value, key);
    } else if (key == "dims.decoder_text") {
        cfg.decoder_text_dim = as_positive_size(value, key);
    } else if (key == "dims.decoder_image") {
        cfg.decoder_image_dim = as_positive_size(value, key);
    } else if (key == "hops") {
        cfg.hops = as_positive_size(value, key);
    } else if (key == "retrieve.k") {
        cfg.retrieve_k = as_positive_size(value, key);
    } else if (key == "retrieve.text_only") {
        cfg.retrieve_text_only = as_bool(value, key);
    } else if (key == "retrieve.expand_hops") {
        cfg.retrieve_expand_hops = as_size(value, key);
    } else if (key == "knn.k") {
        cfg.knn_k = as_positive_size(value, key);
    } else if (key == "knn.threshold") {
        if (!value.is_number()) {
            raise(Errc::InvalidConfigValue, "'" + key + "' must be a number");
        }
        const double t = value.get<double>();
        if (t < -1.0 || t > 1.0) {
            raise(Errc::InvalidConfigValue, "'" + key + "' must lie in [-1,1]");
        }
        cfg.knn_threshold = t;
    } else if (key == "knn.modality") {
        cfg.knn_modality = as_string(value, key);
    } else if (key == "budget.max_tokens") {
        cfg.budget_max_tokens = as_positive_size(value, key);
    } else if (key == "budget.tokenizer") {
        cfg.budget_tokenizer = as_string(value, key);
    } else if (key == "decoder.url") {
        cfg.decoder_url = as_string(value, key);
    } else if (key == "decoder.timeout_ms") {
        cfg.decoder_timeout_ms = static_cast<int>(as_positive_size(value, key));
    } else if (key == "decoder.retries") {
        cfg.decoder_retries = static_cast<int>(as_size(value, key));
    } else if (key == "decoder.backoff_ms") {
        cfg.decoder_backoff_ms = static_cast<int>(as_positive_size(value, key));
    } else if (key == "decoder.accepts_graph_tokens") {
        cfg.decoder_accepts_graph_tokens = as_bool(value, key);
    } else if (key == "mock.seed") {
        cfg.mock_seed = static_cast<std::uint64_t>(as_size(value, key));
    } else if (key == "projector.seed") {
        cfg.projector_seed = static_cast<std::uint64_t>(as_size(value, key));
    } else if (key == "graph.allow_self_loops") {
        cfg.allow_self_loops = as_bool(value, key);
    } else if (key == "adjacency.weighted") {
        cfg.adjacency_weighted = as_bool(value, key);
    } else {
        raise(Errc::UnknownConfigKey, "unknown config key '" + key + "'");
    }
}

} // namespace

TokenBudget Config::budget() const {
    TokenBudget b;
    b.max_tokens = budget_max_tokens;
    if (budget_tokenizer == "whitespace") {
        b.tokenizer = TokenizerKind::Whitespace;
    } else if (budget_tokenizer == "chars_over_4") {
        b.tokenizer = TokenizerKind::CharsOver4;
    } else {
        raise(Errc::InvalidConfigValue, "unknown tokenizer '" + budget_tokenizer + "'");
    }
    return b;
}

Config Config::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    json doc = json::parse(is, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(Errc::SchemaViolation, "config must be a JSON object of key/value pairs");
    }
    Config cfg;
    for (const auto& [key, value] : doc.items()) {
        apply_key(cfg, key, value);
    }
    return cfg;
}

void Config::apply_override(const std::string& key, const std::string& value) {
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded() || parsed.is_object() || parsed.is_array()) {
        parsed = value;  // bare strings stay strings
    }
    apply_key(*this, key, parsed);
}

} // namespace gwm
