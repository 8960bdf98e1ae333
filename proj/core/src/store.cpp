#include "gwm/store.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "gwm/stable_hash.hpp"

#include "json.hpp"

namespace gwm {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr char kStoreMagic[4] = {'G', 'W', 'M', 'E'};

void check_fields(const json& obj, std::initializer_list<const char*> known, bool lenient,
                  const std::string& where) {
    if (lenient) return;
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            raise(Errc::SchemaViolation, "unknown field '" + key + "' in " + where +
                                             " (use lenient mode to ignore)");
        }
    }
}

} // namespace

std::string graph_to_json(const GraphState& state) {
    ordered_json doc;
    doc["version"] = state.version();
    doc["nodes"] = ordered_json::array();
    for (const auto& n : state.nodes()) {
        ordered_json nj;
        nj["id"] = n.id;
        if (n.text) nj["text"] = *n.text;
        if (n.table) {
            ordered_json tj;
            tj["columns"] = n.table->columns;
            tj["values"] = n.table->values;
            nj["table"] = std::move(tj);
        }
        if (n.image_ref) nj["image_ref"] = *n.image_ref;
        doc["nodes"].push_back(std::move(nj));
    }
    doc["edges"] = ordered_json::array();
    for (const auto& e : state.edges()) {
        ordered_json ej;
        ej["src"] = e.src;
        ej["dst"] = e.dst;
        ej["kind"] = edge_kind_name(e.kind);
        ej["weight"] = e.weight;
        if (e.edge_type) ej["edge_type"] = *e.edge_type;
        doc["edges"].push_back(std::move(ej));
    }
    return doc.dump(2) + "\n";
}

GraphState graph_from_json(const std::string& text, bool lenient) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(Errc::SchemaViolation, "graph file is not a JSON object");
    }
    check_fields(doc, {"version", "nodes", "edges"}, lenient, "graph document");
    if (!doc.contains("version") || !doc["version"].is_number_unsigned()) {
        raise(Errc::SchemaViolation, "graph document needs an unsigned 'version'");
    }
    if (!doc.contains("nodes") || !doc["nodes"].is_array() || !doc.contains("edges") ||
        !doc["edges"].is_array()) {
        raise(Errc::SchemaViolation, "graph document needs 'nodes' and 'edges' arrays");
    }

    GraphState state;
    std::vector<MultiModalNode> nodes;
    for (const auto& nj : doc["nodes"]) {
        if (!nj.is_object() || !nj.contains("id") || !nj["id"].is_string()) {
            raise(Errc::SchemaViolation, "node entry needs a string 'id'");
        }
        check_fields(nj, {"id", "text", "table", "image_ref"}, lenient, "node entry");
        MultiModalNode n;
        n.id = nj["id"].get<std::string>();
        if (nj.contains("text")) {
            if (!nj["text"].is_string()) {
                raise(Errc::SchemaViolation, "node text must be a string");
            }
            n.text = nj["text"].get<std::string>();
        }
        if (nj.contains("table")) {
            const auto& tj = nj["table"];
            if (!tj.is_object() || !tj.contains("columns") || !tj.contains("values") ||
                !tj["columns"].is_array() || !tj["values"].is_array()) {
                raise(Errc::SchemaViolation, "node table needs columns/values arrays");
            }
            check_fields(tj, {"columns", "values"}, lenient, "table payload");
            TablePayload table;
            for (const auto& c : tj["columns"]) {
                if (!c.is_string()) raise(Errc::SchemaViolation, "table column must be a string");
                table.columns.push_back(c.get<std::string>());
            }
            for (const auto& v : tj["values"]) {
                if (!v.is_string()) raise(Errc::SchemaViolation, "table value must be a string");
                table.values.push_back(v.get<std::string>());
            }
            table.validate();
            n.table = std::move(table);
        }
        if (nj.contains("image_ref")) {
            if (!nj["image_ref"].is_string()) {
                raise(Errc::SchemaViolation, "node image_ref must be a string");
            }
            n.image_ref = nj["image_ref"].get<std::string>();
        }
        nodes.push_back(std::move(n));
    }
    state = add_nodes(state, std::move(nodes));
    std::vector<Edge> edges;
    for (const auto& ej : doc["edges"]) {
        if (!ej.is_object() || !ej.contains("src") || !ej.contains("dst") || !ej.contains("kind")) {
            raise(Errc::SchemaViolation, "edge entry needs src/dst/kind");
        }
        check_fields(ej, {"src", "dst", "kind", "weight", "edge_type"}, lenient, "edge entry");
        Edge e;
        e.src = ej["src"].get<std::string>();
        e.dst = ej["dst"].get<std::string>();
        e.kind = edge_kind_from_name(ej["kind"].get<std::string>());
        e.weight = ej.value("weight", 1.0);
        if (ej.contains("edge_type")) e.edge_type = ej["edge_type"].get<std::string>();
        edges.push_back(std::move(e));
    }
    // self loops in a saved file were legal when written
    state = add_edges(state, std::move(edges), /*allow_self_loops=*/true);
    // the snapshot counter round-trips; rebuild mutations above are internal
    return with_version(std::move(state), doc["version"].get<std::uint64_t>());
}

void save_graph(const GraphState& state, const std::string& path) {
    std::ofstream os(path, std::ios::trunc | std::ios::binary);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for writing");
    }
    os << graph_to_json(state);
    if (!os) {
        raise(Errc::IoError, "write failed for '" + path + "'");
    }
}

GraphState load_graph(const std::string& path, bool lenient) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return graph_from_json(buffer.str(), lenient);
}

void save_embedding_store(const EmbeddingMatrix& embeddings, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for writing");
    }
    os.write(kStoreMagic, 4);
    detail::write_u32(os, kEmbeddingStoreVersion);
    detail::write_u64(os, embeddings.x.rows);
    detail::write_u64(os, embeddings.x.cols);
    detail::write_u64(os, node_order_digest(embeddings.node_order));
    for (double v : embeddings.x.data) {
        detail::write_f32(os, static_cast<float>(v));
    }
    if (!os) {
        raise(Errc::IoError, "write failed for '" + path + "'");
    }
}

LoadedEmbeddingStore load_embedding_store(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kStoreMagic, 4) != 0) {
        raise(Errc::SchemaViolation, "'" + path + "' is not an embedding store");
    }
    const std::uint32_t version = detail::read_u32(is, "store version");
    if (version != kEmbeddingStoreVersion) {
        raise(Errc::SchemaViolation, "unsupported store version " + std::to_string(version));
    }
    const std::uint64_t rows = detail::read_u64(is, "store rows");
    const std::uint64_t cols = detail::read_u64(is, "store cols");
    LoadedEmbeddingStore out;
    out.node_order_digest = detail::read_u64(is, "store digest");
    out.x = Matrix(rows, cols);
    for (auto& v : out.x.data) {
        v = detail::read_f32(is, "store body");
    }
    is.peek();
    if (!is.eof()) {
        raise(Errc::SchemaViolation, "'" + path + "' has trailing bytes");
    }
    return out;
}

EmbeddingMatrix bind_embedding_store(const LoadedEmbeddingStore& store, const GraphState& state) {
    const auto order = state.node_order();
    if (store.node_order_digest != node_order_digest(order)) {
        raise(Errc::SchemaViolation, "embedding store digest does not match the snapshot");
    }
    if (store.x.rows != order.size()) {
        raise(Errc::ShapeMismatch, "embedding store row count does not match the snapshot");
    }
    EmbeddingMatrix out;
    out.x = store.x;
    out.node_order = order;
    out.source_version = state.version();
    return out;
}

} // namespace gwm
