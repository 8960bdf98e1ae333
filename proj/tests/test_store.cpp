#include "doctest.h"

#include <fstream>

#include "gwm/stable_hash.hpp"
#include "gwm/config.hpp"
#include "gwm/store.hpp"

#include "test_helpers.hpp"

using namespace gwm;
using helpers::text_node;

namespace {

void truncate_file(const std::string& path, double keep_fraction) {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() * keep_fraction));
}

GraphState structured_graph(std::size_t n, std::uint64_t seed) {
    GraphState state = helpers::random_graph(n, 0.1, seed);
    // sprinkle tables, image refs, and typed implicit edges over the base
    SplitMix rng(seed ^ 0x57a7e);
    const auto order = state.node_order();
    for (std::size_t i = 0; i < order.size(); i += 7) {
        auto node = state.node(order[i]);
        TablePayload t;
        t.columns = {"kind", "rank"};
        t.values = {"widget", std::to_string(i)};
        node.table = t;
        node.image_ref = "img-" + std::to_string(i);
        state = with_updated_node(state, node);
    }
    for (std::size_t i = 0; i + 1 < order.size(); i += 5) {
        if (!state.has_edge(order[i], order[i + 1], EdgeKind::Implicit)) {
            state = add_edge(state,
                             Edge{order[i], order[i + 1], EdgeKind::Implicit,
                                  0.25 + 0.5 * rng.next_unit(), "similar"});
        }
    }
    return state;
}

bool structurally_equal(const GraphState& a, const GraphState& b) {
    if (a.version() != b.version()) return false;
    if (a.node_order() != b.node_order()) return false;
    if (a.edge_count() != b.edge_count()) return false;
    for (const auto& id : a.node_order()) {
        const auto& na = a.node(id);
        const auto& nb = b.node(id);
        if (na.text != nb.text || na.image_ref != nb.image_ref) return false;
        if (na.table.has_value() != nb.table.has_value()) return false;
        if (na.table && !(na.table.value() == nb.table.value())) return false;
    }
    for (std::size_t i = 0; i < a.edges().size(); ++i) {
        if (!(a.edges()[i] == b.edges()[i])) return false;
    }
    return true;
}

} // namespace

TEST_CASE("empty graph round-trips byte-stable") {
    const GraphState empty;
    const std::string path = helpers::temp_path("graph-empty") + ".gwm.json";
    save_graph(empty, path);
    const GraphState loaded = load_graph(path);
    const std::string path2 = helpers::temp_path("graph-empty2") + ".gwm.json";
    save_graph(loaded, path2);

    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("a structured 1k-node graph round-trips with structural equality") {
    const GraphState state = structured_graph(1000, 11);
    const std::string path = helpers::temp_path("graph-large") + ".gwm.json";
    save_graph(state, path);
    const GraphState loaded = load_graph(path);
    CHECK(structurally_equal(state, loaded));
    std::remove(path.c_str());
}

TEST_CASE("random graphs round-trip across seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GraphState state = structured_graph(20 + seed * 7, seed);
        const std::string path = helpers::temp_path("graph-seeded") + ".gwm.json";
        save_graph(state, path);
        CHECK(structurally_equal(state, load_graph(path)));
        std::remove(path.c_str());
    }
}

TEST_CASE("truncated graph files raise SchemaViolation") {
    const GraphState state = structured_graph(40, 4);
    const std::string path = helpers::temp_path("graph-trunc") + ".gwm.json";
    save_graph(state, path);
    truncate_file(path, 0.6);
    try {
        load_graph(path);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaViolation);
    }
    std::remove(path.c_str());
}

TEST_CASE("strict mode rejects unknown fields; lenient mode ignores them") {
    const std::string path = helpers::temp_path("graph-unknown") + ".gwm.json";
    {
        std::ofstream os(path);
        os << R"({"version": 1, "nodes": [{"id": "a", "text": "x", "surprise": 1}], "edges": []})";
    }
    try {
        load_graph(path, false);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaViolation);
    }
    const GraphState lenient = load_graph(path, true);
    CHECK(lenient.node_count() == 1);
    std::remove(path.c_str());
}

TEST_CASE("graph files preserve version and edge kinds") {
    GraphState state = add_node(GraphState{}, text_node("a", "x"));
    state = add_node(state, text_node("b", "y"));
    state = add_edge(state, Edge{"a", "b", EdgeKind::Implicit, 0.62});
    const std::string path = helpers::temp_path("graph-kinds") + ".gwm.json";
    save_graph(state, path);
    const GraphState loaded = load_graph(path);
    CHECK(loaded.version() == state.version());
    CHECK(loaded.edges()[0].kind == EdgeKind::Implicit);
    CHECK(loaded.edges()[0].weight == doctest::Approx(0.62));
    std::remove(path.c_str());
}

TEST_CASE("embedding store round-trips to float32 precision") {
    GraphState state = helpers::random_graph(6, 0.3, 2);
    EmbeddingMatrix em;
    em.x = Matrix(6, 5);
    SplitMix rng(77);
    for (auto& v : em.x.data) v = rng.next_signed_unit();
    em.node_order = state.node_order();
    em.source_version = state.version();

    const std::string path = helpers::temp_path("store") + ".gwme";
    save_embedding_store(em, path);
    const LoadedEmbeddingStore loaded = load_embedding_store(path);
    CHECK(loaded.x.rows == 6);
    CHECK(loaded.x.cols == 5);
    CHECK(loaded.node_order_digest == node_order_digest(em.node_order));
    for (std::size_t i = 0; i < em.x.data.size(); ++i) {
        CHECK(loaded.x.data[i] == doctest::Approx(em.x.data[i]).epsilon(1e-7));
    }
    const EmbeddingMatrix bound = bind_embedding_store(loaded, state);
    CHECK(bound.node_order == em.node_order);
    CHECK(bound.source_version == state.version());
    std::remove(path.c_str());
}

TEST_CASE("embedding store writes are byte-stable") {
    GraphState state = helpers::random_graph(4, 0.5, 9);
    EmbeddingMatrix em;
    em.x = Matrix(4, 3);
    SplitMix rng(5);
    for (auto& v : em.x.data) v = rng.next_signed_unit();
    em.node_order = state.node_order();

    const std::string p1 = helpers::temp_path("store-a") + ".gwme";
    const std::string p2 = helpers::temp_path("store-b") + ".gwme";
    save_embedding_store(em, p1);
    // narrow to storage precision then write again: fixed point of save/load
    LoadedEmbeddingStore loaded = load_embedding_store(p1);
    EmbeddingMatrix again;
    again.x = loaded.x;
    again.node_order = em.node_order;
    save_embedding_store(again, p2);
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("truncated embedding stores raise SchemaViolation, never crash") {
    GraphState state = helpers::random_graph(8, 0.3, 3);
    EmbeddingMatrix em;
    em.x = Matrix(8, 4);
    em.node_order = state.node_order();
    const std::string path = helpers::temp_path("store-trunc") + ".gwme";
    save_embedding_store(em, path);
    for (double keep : {0.9, 0.5, 0.1}) {
        const std::string copy = helpers::temp_path("store-trunc-copy") + ".gwme";
        {
            std::ifstream is(path, std::ios::binary);
            std::ofstream os(copy, std::ios::binary);
            os << is.rdbuf();
        }
        truncate_file(copy, keep);
        try {
            load_embedding_store(copy);
            FAIL("expected SchemaViolation at keep fraction ", keep);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SchemaViolation);
        }
        std::remove(copy.c_str());
    }
    std::remove(path.c_str());
}

TEST_CASE("binding a store against the wrong snapshot is rejected") {
    GraphState state = helpers::random_graph(5, 0.4, 8);
    EmbeddingMatrix em;
    em.x = Matrix(5, 2);
    em.node_order = state.node_order();
    const std::string path = helpers::temp_path("store-bind") + ".gwme";
    save_embedding_store(em, path);
    const LoadedEmbeddingStore loaded = load_embedding_store(path);
    const GraphState other = add_node(state, text_node("intruder", "x"));
    try {
        bind_embedding_store(loaded, other);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaViolation);
    }
    std::remove(path.c_str());
}

TEST_CASE("config files load documented keys and reject unknown ones") {
    const std::string path = helpers::temp_path("config") + ".json";
    {
        std::ofstream os(path);
        os << R"({"hops": 6, "retrieve.k": 3, "budget.max_tokens": 512,
                  "knn.threshold": 0.25, "decoder.url": "http://x:1"})";
    }
    Config cfg = Config::load_file(path);
    CHECK(cfg.hops == 6);
    CHECK(cfg.retrieve_k == 3);
    CHECK(cfg.budget_max_tokens == 512);
    CHECK(cfg.knn_threshold.value() == doctest::Approx(0.25));
    CHECK(cfg.decoder_url == "http://x:1");
    {
        std::ofstream os(path);
        os << R"({"hopz": 6})";
    }
    try {
        Config::load_file(path);
        FAIL("expected UnknownConfigKey");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnknownConfigKey);
    }
    {
        std::ofstream os(path);
        os << R"({"hops": 0})";
    }
    CHECK_THROWS_AS(Config::load_file(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("config overrides win and validate like file keys") {
    Config cfg;
    cfg.apply_override("hops", "9");
    CHECK(cfg.hops == 9);
    cfg.apply_override("decoder.url", "http://somewhere:8080");
    CHECK(cfg.decoder_url == "http://somewhere:8080");
    CHECK_THROWS_AS(cfg.apply_override("nope", "1"), Error);
}
