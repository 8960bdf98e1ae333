#pragma once

#include <cstdint>
#include <string>

#include "gwm/embed.hpp"
#include "gwm/graph.hpp"

namespace gwm {

// On-disk format versions, printed by `gwm --version`.
inline constexpr std::uint32_t kGraphFormatVersion = 1;
inline constexpr std::uint32_t kEmbeddingStoreVersion = 1;
inline constexpr std::uint32_t kProjectorFormatVersion = 1;
inline constexpr std::uint32_t kTemplateFileVersion = 1;

// Graph file *.gwm.json:
//   {version, nodes:[{id, text?, table?{columns,values}, image_ref?}],
//    edges:[{src, dst, kind, weight, edge_type?}]}
// Strict mode rejects unknown fields; lenient mode ignores them. Embedding
// slots live in the embedding store, not here.
void save_graph(const GraphState& state, const std::string& path);
GraphState load_graph(const std::string& path, bool lenient = false);

std::string graph_to_json(const GraphState& state);
GraphState graph_from_json(const std::string& text, bool lenient = false);

// Embedding store *.gwme: header {magic "GWME", version u32, rows u64,
// cols u64, node-order digest u64}, body row-major float32 little-endian.
// Doubles are narrowed to float32 on save and promoted back on load.
void save_embedding_store(const EmbeddingMatrix& embeddings, const std::string& path);

struct LoadedEmbeddingStore {
    Matrix x;
    std::uint64_t node_order_digest = 0;
};

LoadedEmbeddingStore load_embedding_store(const std::string& path);

// Checks the digest against the snapshot's node ordering and stamps the
// result with that snapshot's order and version.
EmbeddingMatrix bind_embedding_store(const LoadedEmbeddingStore& store, const GraphState& state);

} // namespace gwm
