#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gwm/errors.hpp"
#include "gwm/matrix.hpp"

namespace gwm {

// One table modality payload: parallel column/value lists.
struct TablePayload {
    std::vector<std::string> columns;
    std::vector<std::string> values;

    // len(columns) == len(values); names non-empty and unique.
    void validate() const;

    bool operator==(const TablePayload&) const = default;
};

enum class Modality { Image, Text, Table, Concat };

const char* modality_name(Modality m) noexcept;

// A world-state node with up to three modality payloads and per-modality
// embedding slots. Images are stored by opaque reference only.
struct MultiModalNode {
    std::string id;
    std::optional<std::string> text;
    std::optional<TablePayload> table;
    std::optional<std::string> image_ref;

    std::optional<std::vector<double>> emb_image;
    std::optional<std::vector<double>> emb_text;
    std::optional<std::vector<double>> emb_table;

    bool has_any_modality() const { return text.has_value() || table.has_value() || image_ref.has_value(); }

    const std::optional<std::vector<double>>& embedding(Modality m) const;
    std::optional<std::vector<double>>& embedding(Modality m);
};

enum class EdgeKind { Explicit, Implicit };

const char* edge_kind_name(EdgeKind k) noexcept;
EdgeKind edge_kind_from_name(const std::string& name);

struct Edge {
    std::string src;
    std::string dst;
    EdgeKind kind = EdgeKind::Explicit;
    double weight = 1.0;
    std::optional<std::string> edge_type;

    bool operator==(const Edge&) const = default;
};

struct StateNodeRef {
    std::string node_id;
};

struct StateEdgeRef {
    std::string src;
    std::string dst;
};

// Adjacency over a stable node ordering (insertion order of node ids). The
// ordering is returned alongside the matrix so downstream results are
// reproducible across runs.
struct Adjacency {
    SparseMatrix matrix;
    std::vector<std::string> node_order;
    std::uint64_t built_from_version = 0;
};

struct AdjacencyOptions {
    std::set<EdgeKind> kinds = {EdgeKind::Explicit, EdgeKind::Implicit};
    std::optional<std::string> edge_type;  // restrict to one edge type
    bool untyped_only = false;             // restrict to edges carrying no type
    bool weighted = false;                 // 0/1 by default
};

// Immutable world-state snapshot. Mutating operations return a fresh
// snapshot with version+1 and leave the receiver untouched; snapshots are
// plain values and safe to share across threads.
class GraphState {
public:
    GraphState() = default;

    std::uint64_t version() const { return version_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    bool has_node(const std::string& id) const { return index_.count(id) > 0; }
    const MultiModalNode& node(const std::string& id) const;
    const std::vector<MultiModalNode>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    // Insertion order of node ids; the stable ordering used by every matrix.
    std::vector<std::string> node_order() const;

    bool has_edge(const std::string& a, const std::string& b, EdgeKind kind,
                  const std::optional<std::string>& edge_type = std::nullopt) const;

    // Sorted unique neighbor ids across all edge kinds/types.
    std::vector<std::string> neighbor_ids(const std::string& id) const;

    // Distinct edge types present, in first-seen order.
    std::vector<std::string> edge_types() const;

private:
    friend GraphState add_node(const GraphState&, MultiModalNode);
    friend GraphState add_edge(const GraphState&, Edge, bool);
    friend GraphState remove_node(const GraphState&, const std::string&);
    friend GraphState remove_edge(const GraphState&, const std::string&, const std::string&,
                                  EdgeKind, const std::optional<std::string>&);
    friend GraphState add_nodes(const GraphState&, std::vector<MultiModalNode>);
    friend GraphState add_edges(const GraphState&, std::vector<Edge>, bool);
    friend GraphState with_updated_node(const GraphState&, const MultiModalNode&);
    friend GraphState with_updated_nodes(const GraphState&, const std::vector<MultiModalNode>&);
    friend GraphState with_version(GraphState, std::uint64_t);

    static std::string edge_key(const Edge& e);
    void insert_node_inplace(MultiModalNode node);
    void insert_edge_inplace(Edge edge, bool allow_self_loops);
    void update_node_inplace(const MultiModalNode& node);

    std::vector<MultiModalNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Edge> edges_;
    std::set<std::string> edge_keys_;
    std::uint64_t version_ = 0;
};

// Mutation primitives. Each returns a new snapshot (version+1).
GraphState add_node(const GraphState& state, MultiModalNode node);
GraphState add_edge(const GraphState& state, Edge edge, bool allow_self_loops = false);
GraphState remove_node(const GraphState& state, const std::string& id);
GraphState remove_edge(const GraphState& state, const std::string& src, const std::string& dst,
                       EdgeKind kind, const std::optional<std::string>& edge_type = std::nullopt);

// Batch variants: one copy, one version bump. Same validation per element.
GraphState add_nodes(const GraphState& state, std::vector<MultiModalNode> nodes);
GraphState add_edges(const GraphState& state, std::vector<Edge> edges,
                     bool allow_self_loops = false);
GraphState with_updated_nodes(const GraphState& state, const std::vector<MultiModalNode>& nodes);

// Replaces an existing node's payloads/embedding slots in place (same id),
// bumping the version. Used by transitions.
GraphState with_updated_node(const GraphState& state, const MultiModalNode& node);

// Pins the snapshot counter; transition application composes several
// primitive mutations into a single version increment.
GraphState with_version(GraphState state, std::uint64_t version);

// Symmetric adjacency over the stable node ordering.
Adjacency adjacency(const GraphState& state, const AdjacencyOptions& opts = {});

// Per-modality embedding widths discovered from populated slots; absent
// everywhere means width 0. Defines the zero-filled concat layout.
struct ConcatLayout {
    std::size_t image = 0;
    std::size_t text = 0;
    std::size_t table = 0;
    std::size_t total() const { return image + text + table; }
};

ConcatLayout concat_layout(const GraphState& state);

// Zero-filled concatenation [image | text | table] for one node under the
// given layout; raises MissingEmbedding when no slot is populated.
std::vector<double> concat_embedding(const MultiModalNode& node, const ConcatLayout& layout);

} // namespace gwm
