#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gwm/graph.hpp"
#include "gwm/matrix.hpp"

namespace gwm {

// Symmetric-normalized adjacency: entries a_ij / sqrt(d_i * d_j) with d the
// row sums of the input. Rows/columns of isolated nodes stay all-zero.
struct NormalizedAdjacency {
    SparseMatrix matrix;
    std::vector<std::string> node_order;
    std::uint64_t built_from_version = 0;
};

// cosine(a, b); defined as 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Adds implicit edges from the union of each node's k nearest neighbors by
// cosine similarity over the chosen embedding slot. Ties break by
// (similarity desc, node id asc). Already-present implicit edges are kept as
// is, so the operation is idempotent; when nothing new is added the input
// snapshot is returned unchanged.
GraphState knn_implicit_edges(const GraphState& state, Modality modality, std::size_t k,
                              double threshold);

NormalizedAdjacency normalize_adjacency(const Adjacency& adj);

// Power-iteration estimate of the largest |eigenvalue|; for symmetric input
// the estimate never exceeds the true spectral radius. Deterministic given
// the seed.
double spectral_radius_estimate(const NormalizedAdjacency& norm, std::size_t iters,
                                std::uint64_t seed);

} // namespace gwm
