#include <cmath>

#include "gwm/decoder_client.hpp"
#include "gwm/stable_hash.hpp"

namespace gwm {

std::size_t EmbedderDims::dim_for(const std::string& modality) const {
    if (modality == "image") return image;
    if (modality == "text") return text;
    if (modality == "table") return table;
    raise(Errc::SchemaViolation, "unknown modality '" + modality + "'");
}

std::string DecoderClient::caption(const std::string& image_ref) {
    CompleteRequest req;
    req.prompt = "CAPTION:" + image_ref;
    req.max_tokens = 256;
    return complete(req).text;
}

std::vector<double> mock_embed_vector(const std::string& modality, const std::string& content,
                                      std::uint64_t seed, std::size_t dim) {
    std::uint64_t h = fnv1a64(modality);
    h = fnv1a64(std::string_view("\x1f"), h);
    h = fnv1a64(content, h);
    SplitMix stream(h ^ splitmix64(seed));

    std::vector<double> v(dim);
    double norm_sq = 0.0;
    for (auto& x : v) {
        x = stream.next_signed_unit();
        norm_sq += x * x;
    }
    if (norm_sq < 1e-300) {
        v.assign(dim, 0.0);
        v[0] = 1.0;
        return v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) x *= inv;
    return v;
}

std::string mock_complete_text(const std::string& prompt) {
    if (prompt.rfind("CAPTION:", 0) == 0) {
        return "MOCK_CAPTION:" + prompt.substr(8);
    }
    const auto pos = prompt.find("ANSWER:");
    if (pos != std::string::npos) {
        std::string suffix = prompt.substr(pos + 7);
        const auto begin = suffix.find_first_not_of(" \t\r\n");
        const auto end = suffix.find_last_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        return suffix.substr(begin, end - begin + 1);
    }
    return "MOCK_COMPLETION:" + hex64(fnv1a64(prompt));
}

std::string mock_image_ref(const std::string& prompt) {
    return "mockimg-" + hex64(fnv1a64(prompt));
}

namespace {

std::string mock_request_id(std::string_view payload) {
    return hex64(fnv1a64(payload) ^ 0x6d6f636b6964ull);  // "mockid"
}

} // namespace

DecoderResponse MockDecoderClient::complete(const CompleteRequest& req) {
    DecoderResponse resp;
    resp.text = mock_complete_text(req.prompt);
    resp.service_id = "mock";
    resp.request_id = mock_request_id(req.prompt);
    return resp;
}

DecoderResponse MockDecoderClient::generate_image(const GenerateImageRequest& req) {
    DecoderResponse resp;
    resp.image_ref = mock_image_ref(req.prompt);
    resp.service_id = "mock";
    resp.request_id = mock_request_id(req.prompt);
    return resp;
}

DecoderResponse MockDecoderClient::embed(const EmbedRequest& req) {
    DecoderResponse resp;
    resp.vector = mock_embed_vector(req.modality, req.content, seed_, dims_.dim_for(req.modality));
    resp.service_id = "mock";
    resp.request_id = mock_request_id(req.modality + "\x1f" + req.content);
    return resp;
}

} // namespace gwm
