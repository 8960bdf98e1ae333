#include "gwm/embed.hpp"

#include <algorithm>

#include "gwm/token_mp.hpp"

namespace gwm {

namespace {

std::vector<double> fetch_embedding(DecoderClient& embedder, const std::string& modality,
                                    const std::string& content, std::size_t expect_dim,
                                    const std::string& node_id) {
    DecoderResponse resp;
    try {
        resp = embedder.embed(EmbedRequest{modality, content});
    } catch (const Error& e) {
        if (e.code() == Errc::DecoderUnavailable || e.code() == Errc::Overloaded) {
            raise(Errc::EmbedderUnavailable, std::string("embedder: ") + e.what());
        }
        throw;
    }
    if (resp.vector.size() != expect_dim) {
        raise(Errc::DimensionMismatch,
              "embedder returned " + std::to_string(resp.vector.size()) + " dims for " + modality +
                  " of node '" + node_id + "', expected " + std::to_string(expect_dim));
    }
    return resp.vector;
}

} // namespace

GraphState populate_embeddings(const GraphState& state, DecoderClient& embedder,
                               const EmbedderDims& dims) {
    std::vector<MultiModalNode> patched;
    for (const auto& id : state.node_order()) {
        MultiModalNode node = state.node(id);
        bool touched = false;
        if (node.image_ref && !node.emb_image) {
            node.emb_image = fetch_embedding(embedder, "image", *node.image_ref, dims.image, id);
            touched = true;
        }
        if (node.text && !node.emb_text) {
            node.emb_text = fetch_embedding(embedder, "text", *node.text, dims.text, id);
            touched = true;
        }
        if (node.table && !node.emb_table) {
            node.emb_table =
                fetch_embedding(embedder, "table", table_to_text(*node.table), dims.table, id);
            touched = true;
        }
        if (touched) {
            patched.push_back(std::move(node));
        }
    }
    if (patched.empty()) return state;
    return with_updated_nodes(state, patched);
}

EmbeddingMatrix assemble_embeddings(const GraphState& state, DecoderClient& embedder,
                                    const EmbedderDims& dims) {
    const auto order = state.node_order();
    EmbeddingMatrix out;
    out.x = Matrix(order.size(), dims.total());
    out.node_order = order;
    out.source_version = state.version();

    for (std::size_t r = 0; r < order.size(); ++r) {
        const MultiModalNode& node = state.node(order[r]);
        auto row = out.x.row(r);

        auto place = [&](std::size_t offset, std::size_t width,
                         const std::optional<std::vector<double>>& slot,
                         const std::string& modality, const std::string& content, bool present) {
            if (!present) return;  // absent modality keeps its zero fill
            std::vector<double> v;
            if (slot) {
                if (slot->size() != width) {
                    raise(Errc::DimensionMismatch, "cached " + modality + " slot of node '" +
                                                       node.id + "' has dim " +
                                                       std::to_string(slot->size()) + ", expected " +
                                                       std::to_string(width));
                }
                v = *slot;
            } else {
                v = fetch_embedding(embedder, modality, content, width, node.id);
            }
            std::copy(v.begin(), v.end(), row.begin() + static_cast<std::ptrdiff_t>(offset));
        };

        place(0, dims.image, node.emb_image, "image", node.image_ref.value_or(""),
              node.image_ref.has_value());
        place(dims.image, dims.text, node.emb_text, "text", node.text.value_or(""),
              node.text.has_value());
        place(dims.image + dims.text, dims.table, node.emb_table, "table",
              node.table ? table_to_text(*node.table) : "", node.table.has_value());
    }
    return out;
}

HopStack propagate(const EmbeddingMatrix& embeddings, const NormalizedAdjacency& norm,
                   std::size_t hops) {
    if (hops == 0) {
        raise(Errc::ShapeMismatch, "hop count must be >= 1");
    }
    if (norm.matrix.rows() != embeddings.x.rows) {
        raise(Errc::ShapeMismatch, "adjacency rows " + std::to_string(norm.matrix.rows()) +
                                       " vs embedding rows " + std::to_string(embeddings.x.rows));
    }
    if (norm.built_from_version != embeddings.source_version) {
        raise(Errc::StaleEmbedding,
              "adjacency built from version " + std::to_string(norm.built_from_version) +
                  " but embeddings from version " + std::to_string(embeddings.source_version));
    }

    HopStack stack;
    stack.hop_count = hops;
    stack.node_order = embeddings.node_order;
    stack.source_version = embeddings.source_version;
    stack.hops.reserve(hops + 1);
    stack.hops.push_back(embeddings.x);
    for (std::size_t l = 1; l <= hops; ++l) {
        stack.hops.push_back(norm.matrix.multiply(stack.hops.back()));
    }
    return stack;
}

std::map<std::string, HopStack> propagate_per_edge_type(const GraphState& state,
                                                        const EmbeddingMatrix& embeddings,
                                                        std::size_t hops, bool weighted) {
    std::map<std::string, HopStack> out;
    for (const auto& type : state.edge_types()) {
        AdjacencyOptions opts;
        opts.edge_type = type;
        opts.weighted = weighted;
        out.emplace(type, propagate(embeddings, normalize_adjacency(adjacency(state, opts)), hops));
    }
    return out;
}

std::vector<PropagationChannel> propagation_channels(const GraphState& state, bool weighted) {
    std::vector<PropagationChannel> channels;
    const auto types = state.edge_types();
    if (types.empty()) {
        AdjacencyOptions opts;
        opts.weighted = weighted;
        channels.push_back({"", normalize_adjacency(adjacency(state, opts))});
        return channels;
    }
    for (const auto& type : types) {
        AdjacencyOptions opts;
        opts.edge_type = type;
        opts.weighted = weighted;
        channels.push_back({type, normalize_adjacency(adjacency(state, opts))});
    }
    bool any_untyped = false;
    for (const auto& e : state.edges()) {
        if (!e.edge_type) {
            any_untyped = true;
            break;
        }
    }
    if (any_untyped) {
        AdjacencyOptions opts;
        opts.untyped_only = true;
        opts.weighted = weighted;
        channels.push_back({"", normalize_adjacency(adjacency(state, opts))});
    }
    return channels;
}

std::vector<double> column_variance(const Matrix& m) {
    std::vector<double> var(m.cols, 0.0);
    if (m.rows == 0) return var;
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
        mean /= static_cast<double>(m.rows);
        double acc = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double d = m.at(r, c) - mean;
            acc += d * d;
        }
        var[c] = acc / static_cast<double>(m.rows);
    }
    return var;
}

} // namespace gwm
