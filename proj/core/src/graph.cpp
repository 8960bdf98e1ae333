#include "gwm/graph.hpp"

#include <algorithm>
#include <unordered_set>

namespace gwm {

void TablePayload::validate() const {
    if (columns.size() != values.size()) {
        raise(Errc::SchemaViolation, "table payload: column/value count mismatch");
    }
    std::unordered_set<std::string> seen;
    for (const auto& c : columns) {
        if (c.empty()) {
            raise(Errc::SchemaViolation, "table payload: empty column name");
        }
        if (!seen.insert(c).second) {
            raise(Errc::SchemaViolation, "table payload: duplicate column name '" + c + "'");
        }
    }
}

const char* modality_name(Modality m) noexcept {
    switch (m) {
        case Modality::Image: return "image";
        case Modality::Text: return "text";
        case Modality::Table: return "table";
        case Modality::Concat: return "concat";
    }
    return "?";
}

const std::optional<std::vector<double>>& MultiModalNode::embedding(Modality m) const {
    switch (m) {
        case Modality::Image: return emb_image;
        case Modality::Table: return emb_table;
        default: return emb_text;
    }
}

std::optional<std::vector<double>>& MultiModalNode::embedding(Modality m) {
    switch (m) {
        case Modality::Image: return emb_image;
        case Modality::Table: return emb_table;
        default: return emb_text;
    }
}

const char* edge_kind_name(EdgeKind k) noexcept {
    return k == EdgeKind::Explicit ? "explicit" : "implicit";
}

EdgeKind edge_kind_from_name(const std::string& name) {
    if (name == "explicit") return EdgeKind::Explicit;
    if (name == "implicit") return EdgeKind::Implicit;
    raise(Errc::SchemaViolation, "unknown edge kind '" + name + "'");
}

const MultiModalNode& GraphState::node(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        raise(Errc::UnknownNode, "no node '" + id + "'");
    }
    return nodes_[it->second];
}

std::vector<std::string> GraphState::node_order() const {
    std::vector<std::string> order;
    order.reserve(nodes_.size());
    for (const auto& n : nodes_) order.push_back(n.id);
    return order;
}

std::string GraphState::edge_key(const Edge& e) {
    // undirected identity: canonicalize endpoint order
    const std::string& a = e.src <= e.dst ? e.src : e.dst;
    const std::string& b = e.src <= e.dst ? e.dst : e.src;
    std::string key = a;
    key += '\x1f';
    key += b;
    key += '\x1f';
    key += edge_kind_name(e.kind);
    key += '\x1f';
    if (e.edge_type) key += *e.edge_type;
    return key;
}

bool GraphState::has_edge(const std::string& a, const std::string& b, EdgeKind kind,
                          const std::optional<std::string>& edge_type) const {
    Edge probe{a, b, kind, 1.0, edge_type};
    return edge_keys_.count(edge_key(probe)) > 0;
}

std::vector<std::string> GraphState::neighbor_ids(const std::string& id) const {
    if (!has_node(id)) {
        raise(Errc::UnknownNode, "no node '" + id + "'");
    }
    std::set<std::string> out;
    for (const auto& e : edges_) {
        if (e.src == id && e.dst != id) out.insert(e.dst);
        if (e.dst == id && e.src != id) out.insert(e.src);
    }
    return {out.begin(), out.end()};
}

std::vector<std::string> GraphState::edge_types() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& e : edges_) {
        if (e.edge_type && seen.insert(*e.edge_type).second) {
            out.push_back(*e.edge_type);
        }
    }
    return out;
}

void GraphState::insert_node_inplace(MultiModalNode node) {
    if (node.id.empty()) {
        raise(Errc::SchemaViolation, "node id must be non-empty");
    }
    if (has_node(node.id)) {
        raise(Errc::DuplicateId, "node '" + node.id + "' already present");
    }
    if (!node.has_any_modality()) {
        raise(Errc::EmptyNode, "node '" + node.id + "' carries no modality");
    }
    if (node.table) node.table->validate();
    index_[node.id] = nodes_.size();
    nodes_.push_back(std::move(node));
}

void GraphState::insert_edge_inplace(Edge edge, bool allow_self_loops) {
    if (!has_node(edge.src)) {
        raise(Errc::DanglingEndpoint, "edge endpoint '" + edge.src + "' not in state");
    }
    if (!has_node(edge.dst)) {
        raise(Errc::DanglingEndpoint, "edge endpoint '" + edge.dst + "' not in state");
    }
    if (edge.src == edge.dst && !allow_self_loops) {
        raise(Errc::SchemaViolation, "self edge on '" + edge.src + "' disallowed");
    }
    if (edge.weight < 0.0) {
        raise(Errc::SchemaViolation, "edge weight must be non-negative");
    }
    if (edge.kind == EdgeKind::Implicit && edge.weight > 1.0) {
        raise(Errc::SchemaViolation, "implicit edge weight must lie in [0,1]");
    }
    std::string key = edge_key(edge);
    if (edge_keys_.count(key) > 0) {
        raise(Errc::DuplicateEdge, "edge (" + edge.src + "," + edge.dst + ") already present");
    }
    edges_.push_back(std::move(edge));
    edge_keys_.insert(std::move(key));
}

void GraphState::update_node_inplace(const MultiModalNode& node) {
    auto it = index_.find(node.id);
    if (it == index_.end()) {
        raise(Errc::UnknownNode, "no node '" + node.id + "'");
    }
    if (!node.has_any_modality()) {
        raise(Errc::EmptyNode, "node '" + node.id + "' carries no modality");
    }
    if (node.table) node.table->validate();
    nodes_[it->second] = node;
}

GraphState add_node(const GraphState& state, MultiModalNode node) {
    GraphState next = state;
    next.insert_node_inplace(std::move(node));
    next.version_ = state.version_ + 1;
    return next;
}

GraphState add_edge(const GraphState& state, Edge edge, bool allow_self_loops) {
    GraphState next = state;
    next.insert_edge_inplace(std::move(edge), allow_self_loops);
    next.version_ = state.version_ + 1;
    return next;
}

GraphState add_nodes(const GraphState& state, std::vector<MultiModalNode> nodes) {
    GraphState next = state;
    for (auto& n : nodes) {
        next.insert_node_inplace(std::move(n));
    }
    next.version_ = state.version_ + 1;
    return next;
}

GraphState add_edges(const GraphState& state, std::vector<Edge> edges, bool allow_self_loops) {
    GraphState next = state;
    for (auto& e : edges) {
        next.insert_edge_inplace(std::move(e), allow_self_loops);
    }
    next.version_ = state.version_ + 1;
    return next;
}

GraphState remove_node(const GraphState& state, const std::string& id) {
    if (!state.has_node(id)) {
        raise(Errc::UnknownNode, "no node '" + id + "'");
    }
    GraphState next;
    next.version_ = state.version_ + 1;
    for (const auto& n : state.nodes_) {
        if (n.id == id) continue;
        next.index_[n.id] = next.nodes_.size();
        next.nodes_.push_back(n);
    }
    for (const auto& e : state.edges_) {
        if (e.src == id || e.dst == id) continue;  // incident edges go with the node
        next.edges_.push_back(e);
        next.edge_keys_.insert(GraphState::edge_key(e));
    }
    return next;
}

GraphState remove_edge(const GraphState& state, const std::string& src, const std::string& dst,
                       EdgeKind kind, const std::optional<std::string>& edge_type) {
    if (!state.has_edge(src, dst, kind, edge_type)) {
        raise(Errc::UnknownEdge, "no such edge (" + src + "," + dst + ")");
    }
    Edge probe{src, dst, kind, 1.0, edge_type};
    const std::string key = GraphState::edge_key(probe);

    GraphState next = state;
    next.edges_.erase(std::remove_if(next.edges_.begin(), next.edges_.end(),
                                     [&](const Edge& e) { return GraphState::edge_key(e) == key; }),
                      next.edges_.end());
    next.edge_keys_.erase(key);
    next.version_ = state.version_ + 1;
    return next;
}

GraphState with_updated_node(const GraphState& state, const MultiModalNode& node) {
    GraphState next = state;
    next.update_node_inplace(node);
    next.version_ = state.version_ + 1;
    return next;
}

GraphState with_updated_nodes(const GraphState& state, const std::vector<MultiModalNode>& nodes) {
    GraphState next = state;
    for (const auto& n : nodes) {
        next.update_node_inplace(n);
    }
    next.version_ = state.version_ + 1;
    return next;
}

GraphState with_version(GraphState state, std::uint64_t version) {
    state.version_ = version;
    return state;
}

ConcatLayout concat_layout(const GraphState& state) {
    ConcatLayout layout;
    for (const auto& n : state.nodes()) {
        if (n.emb_image && layout.image == 0) layout.image = n.emb_image->size();
        if (n.emb_text && layout.text == 0) layout.text = n.emb_text->size();
        if (n.emb_table && layout.table == 0) layout.table = n.emb_table->size();
    }
    return layout;
}

std::vector<double> concat_embedding(const MultiModalNode& node, const ConcatLayout& layout) {
    if (!node.emb_image && !node.emb_text && !node.emb_table) {
        raise(Errc::MissingEmbedding, "node '" + node.id + "' has no embedding slot set");
    }
    std::vector<double> out;
    out.reserve(layout.total());
    auto place = [&out](const std::optional<std::vector<double>>& slot, std::size_t width,
                        const std::string& id, const char* name) {
        if (!slot) {
            out.insert(out.end(), width, 0.0);
            return;
        }
        if (slot->size() != width) {
            raise(Errc::DimensionMismatch, std::string(name) + " slot of node '" + id +
                                               "' has dim " + std::to_string(slot->size()) +
                                               ", layout expects " + std::to_string(width));
        }
        out.insert(out.end(), slot->begin(), slot->end());
    };
    place(node.emb_image, layout.image, node.id, "image");
    place(node.emb_text, layout.text, node.id, "text");
    place(node.emb_table, layout.table, node.id, "table");
    return out;
}

Adjacency adjacency(const GraphState& state, const AdjacencyOptions& opts) {
    const auto order = state.node_order();
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;

    if (opts.edge_type) {
        const auto types = state.edge_types();
        if (std::find(types.begin(), types.end(), *opts.edge_type) == types.end()) {
            raise(Errc::UnknownEdgeType, "edge type '" + *opts.edge_type + "' not present");
        }
    }

    std::vector<SparseMatrix::Triplet> triplets;
    for (const auto& e : state.edges()) {
        if (opts.kinds.count(e.kind) == 0) continue;
        if (opts.edge_type && e.edge_type != opts.edge_type) continue;
        if (opts.untyped_only && e.edge_type.has_value()) continue;
        const double v = opts.weighted ? e.weight : 1.0;
        const std::size_t i = pos[e.src];
        const std::size_t j = pos[e.dst];
        if (i == j) {
            triplets.push_back({i, i, v});
        } else {
            triplets.push_back({i, j, v});
            triplets.push_back({j, i, v});
        }
    }
    Adjacency out;
    out.matrix = SparseMatrix::from_triplets(order.size(), order.size(), std::move(triplets));
    out.node_order = order;
    out.built_from_version = state.version();
    return out;
}

} // namespace gwm
