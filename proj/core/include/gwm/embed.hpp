#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gwm/decoder_client.hpp"
#include "gwm/edge_builder.hpp"
#include "gwm/graph.hpp"
#include "gwm/matrix.hpp"

namespace gwm {

// Concatenated per-node embedding matrix with its provenance. source_version
// stamps guard against mixing matrices from different snapshots.
struct EmbeddingMatrix {
    Matrix x;  // n x (image + text + table)
    std::vector<std::string> node_order;
    std::uint64_t source_version = 0;
};

// Fills every node's per-modality embedding slots from the embedder client,
// skipping slots that are already populated. Tables embed via their text
// rendering; images via their opaque reference.
GraphState populate_embeddings(const GraphState& state, DecoderClient& embedder,
                               const EmbedderDims& dims);

// Row per node in stable order: [image | text | table], zero-filled where the
// modality is absent. Slots already populated on the node are used as a
// cache; everything else is fetched (without persisting).
EmbeddingMatrix assemble_embeddings(const GraphState& state, DecoderClient& embedder,
                                    const EmbedderDims& dims);

// The retained stack [X, X^(1), ..., X^(L)] of per-hop matrices.
struct HopStack {
    std::vector<Matrix> hops;  // exactly L+1 entries, all n x d
    std::size_t hop_count = 0; // L
    std::vector<std::string> node_order;
    std::uint64_t source_version = 0;
};

// hops[l] = normalized_adjacency * hops[l-1], computed iteratively with fixed
// accumulation order (bitwise deterministic).
HopStack propagate(const EmbeddingMatrix& embeddings, const NormalizedAdjacency& norm,
                   std::size_t hops);

// Heterogeneous extension: one stack per edge type, each propagated over the
// adjacency restricted to that type.
std::map<std::string, HopStack> propagate_per_edge_type(const GraphState& state,
                                                        const EmbeddingMatrix& embeddings,
                                                        std::size_t hops,
                                                        bool weighted = false);

// Propagation channels in deterministic order: one per edge type (first-seen
// order) plus a trailing untyped channel when untyped edges exist. A graph
// with no typed edges is a single channel over the whole edge set.
struct PropagationChannel {
    std::string name;  // edge type, or "" for the untyped remainder
    NormalizedAdjacency normalized;
};
std::vector<PropagationChannel> propagation_channels(const GraphState& state,
                                                     bool weighted = false);

// Across-node variance of each column; the over-smoothing diagnostic.
std::vector<double> column_variance(const Matrix& m);

} // namespace gwm
