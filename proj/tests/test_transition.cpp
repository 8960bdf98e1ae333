#include "doctest.h"

#include "gwm/tasks.hpp"
#include "gwm/transition.hpp"

#include "test_helpers.hpp"

using namespace gwm;
using helpers::text_node;

namespace {

GraphState embedded_pair() {
    GraphState state;
    auto a = text_node("n1", "first");
    a.emb_text = std::vector<double>(4, 0.5);
    state = add_node(state, a);
    auto b = text_node("n2", "second");
    b.emb_text = std::vector<double>(4, 0.25);
    state = add_node(state, b);
    return add_edge(state, Edge{"n1", "n2", EdgeKind::Explicit});
}

// decoder that always fails, for atomicity checks
class DeadDecoder : public DecoderClient {
public:
    DecoderResponse complete(const CompleteRequest&) override {
        raise(Errc::DecoderUnavailable, "dead");
    }
    DecoderResponse generate_image(const GenerateImageRequest&) override {
        raise(Errc::DecoderUnavailable, "dead");
    }
    DecoderResponse embed(const EmbedRequest&) override {
        raise(Errc::DecoderUnavailable, "dead");
    }
};

} // namespace

TEST_CASE("update-nodes replaces text and clears the stale embedding slot") {
    const GraphState state = embedded_pair();
    Transition t;
    t.kind = Transition::Kind::UpdateNodes;
    t.base_version = state.version();
    t.patches.push_back(NodePatch{"n1", std::string("rewritten"), std::nullopt, std::nullopt});

    const GraphState next = apply(state, t);
    CHECK(next.node("n1").text.value() == "rewritten");
    CHECK_FALSE(next.node("n1").emb_text.has_value());  // cache cleared on write
    CHECK(next.node("n2").emb_text.has_value());
    CHECK(next.version() == state.version() + 1);
    // untouched modalities survive
    CHECK(state.node("n1").text.value() == "first");
}

TEST_CASE("update-edges removing an absent edge is stale") {
    const GraphState state = embedded_pair();
    Transition t;
    t.kind = Transition::Kind::UpdateEdges;
    t.base_version = state.version();
    t.remove_edges.push_back(Edge{"n1", "n2", EdgeKind::Implicit});  // wrong kind: absent
    try {
        apply(state, t);
        FAIL("expected StaleTransition");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::StaleTransition);
    }
}

TEST_CASE("update-edges applies removals before additions") {
    const GraphState state = embedded_pair();
    Transition t;
    t.kind = Transition::Kind::UpdateEdges;
    t.base_version = state.version();
    t.remove_edges.push_back(Edge{"n1", "n2", EdgeKind::Explicit});
    t.add_edges.push_back(Edge{"n1", "n2", EdgeKind::Implicit, 0.4});
    const GraphState next = apply(state, t);
    CHECK(next.edge_count() == 1);
    CHECK(next.edges()[0].kind == EdgeKind::Implicit);
    CHECK(next.version() == state.version() + 1);
}

TEST_CASE("update-graph inserts nodes then edges with one version bump") {
    const GraphState state = embedded_pair();
    Transition t;
    t.kind = Transition::Kind::UpdateGraph;
    t.base_version = state.version();
    t.new_nodes.push_back(text_node("n3", "third"));
    t.new_nodes.push_back(text_node("n4", "fourth"));
    t.add_edges.push_back(Edge{"n3", "n4", EdgeKind::Explicit});
    const GraphState next = apply(state, t);
    CHECK(next.node_count() == state.node_count() + 2);
    CHECK(next.edge_count() == state.edge_count() + 1);
    CHECK(next.version() == state.version() + 1);
}

TEST_CASE("transitions built against another version are stale") {
    const GraphState state = embedded_pair();
    Transition t;
    t.kind = Transition::Kind::UpdateNodes;
    t.base_version = state.version() + 5;
    try {
        apply(state, t);
        FAIL("expected StaleTransition");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::StaleTransition);
    }
}

TEST_CASE("transition log round-trips JSON lines with provenance") {
    Transition a;
    a.kind = Transition::Kind::UpdateEdges;
    a.base_version = 3;
    a.add_edges.push_back(Edge{"u", "v", EdgeKind::Explicit, 1.0, "interaction"});
    a.provenance = {"action-1", "resp-9"};
    Transition b;
    b.kind = Transition::Kind::UpdateNodes;
    b.base_version = 4;
    b.patches.push_back(NodePatch{"u", std::string("new text"), std::nullopt, std::nullopt});
    b.provenance = {"action-2", "resp-10"};

    const std::string path = helpers::temp_path("transitions") + ".jsonl";
    append_transition_log(path, a);
    append_transition_log(path, b);
    const auto read = read_transition_log(path);
    REQUIRE(read.size() == 2);
    CHECK(read[0].kind == Transition::Kind::UpdateEdges);
    CHECK(read[0].add_edges.size() == 1);
    CHECK(read[0].add_edges[0].edge_type.value() == "interaction");
    CHECK(read[0].provenance.action_id == "action-1");
    CHECK(read[1].patches.at(0).text.value() == "new text");
    CHECK(read[1].base_version == 4);
    std::remove(path.c_str());
}

TEST_CASE("step: mock yes on an edge-level action adds the edge") {
    const TaskSpec spec = TaskSpec::defaults(TaskKind::Recommendation);
    MockDecoderClient mock;
    const TaskFixture fx = build_task_fixture(spec, mock);
    const auto adapter = make_adapter(spec);
    StepClients clients{&mock, &mock, &mock};
    StepConfig config;
    config.hops = 1;

    CHECK_FALSE(fx.state.has_edge("user-0000", "item-0001", EdgeKind::Explicit,
                                  std::string("interaction")));
    const StepResult result = step(fx.state, fx.action, *adapter, clients, config);
    REQUIRE(result.transition.has_value());
    CHECK(result.state.has_edge("user-0000", "item-0001", EdgeKind::Explicit,
                                std::string("interaction")));
    CHECK(result.state.version() == fx.state.version() + 1);
    CHECK(result.response.text.rfind("yes", 0) == 0);  // mock echoes the whole suffix
    CHECK(result.transition->provenance.action_id == fx.action.id);
}

TEST_CASE("step: decoder failure leaves the state version unchanged") {
    const TaskSpec spec = TaskSpec::defaults(TaskKind::Recommendation);
    MockDecoderClient mock;
    const TaskFixture fx = build_task_fixture(spec, mock);
    const auto adapter = make_adapter(spec);
    DeadDecoder dead;
    StepClients clients{&dead, &dead, &mock};
    StepConfig config;
    config.hops = 1;
    try {
        step(fx.state, fx.action, *adapter, clients, config);
        FAIL("expected DecoderUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DecoderUnavailable);
    }
    CHECK(fx.state.version() == build_task_fixture(spec, mock).state.version());
}

TEST_CASE("step: image generation sets the target's image_ref") {
    const TaskSpec spec = TaskSpec::defaults(TaskKind::MultiModalGeneration);
    MockDecoderClient mock;
    const TaskFixture fx = build_task_fixture(spec, mock);
    const auto adapter = make_adapter(spec);
    StepClients clients{&mock, &mock, &mock};
    StepConfig config;
    config.hops = 1;
    config.pipeline = Pipeline::EmbedMP;

    CHECK_FALSE(fx.state.node("entity-0000").image_ref.has_value());
    const StepResult result = step(fx.state, fx.action, *adapter, clients, config);
    REQUIRE(result.transition.has_value());
    CHECK(result.state.node("entity-0000").image_ref.has_value());
    CHECK(result.state.node("entity-0000").image_ref->rfind("mockimg-", 0) == 0);
    CHECK(result.response.image_ref == result.state.node("entity-0000").image_ref.value());
}

TEST_CASE("step: heterogeneous graphs flatten one token sequence per channel") {
    // capture the graph tokens the decoder receives
    class CapturingDecoder : public MockDecoderClient {
    public:
        using MockDecoderClient::MockDecoderClient;
        std::size_t seen_tokens = 0;
        DecoderResponse complete(const CompleteRequest& req) override {
            if (req.graph_tokens) seen_tokens = req.graph_tokens->size();
            return MockDecoderClient::complete(req);
        }
    };

    const TaskSpec spec = TaskSpec::defaults(TaskKind::Rag);
    MockDecoderClient mock;
    TaskFixture fx = build_task_fixture(spec, mock);  // homogeneous chunk graph
    // one typed edge alongside the untyped implicit edges: two channels
    const GraphState typed =
        add_edge(fx.state, Edge{"chunk-0000", "chunk-0001", EdgeKind::Explicit, 1.0, "citation"});

    CapturingDecoder capturing(0);
    StepClients clients{&capturing, &capturing, &capturing};
    StepConfig config;
    config.hops = 2;
    config.pipeline = Pipeline::EmbedMP;
    config.dims = EmbedderDims{};
    const auto adapter = make_adapter(spec);
    (void)step(typed, fx.action, *adapter, clients, config);
    // graph scope over 5 targets: (hops+1) tokens per channel, 2 channels
    CHECK(capturing.seen_tokens == 2 * (config.hops + 1));

    CapturingDecoder single(0);
    StepClients plain_clients{&single, &single, &single};
    (void)step(fx.state, fx.action, *adapter, plain_clients, config);
    CHECK(single.seen_tokens == config.hops + 1);
}

TEST_CASE("step: unparseable responses carry the response and change nothing") {
    TaskSpec spec = TaskSpec::defaults(TaskKind::Recommendation);
    spec.rec.planted_answer = "maybe";
    MockDecoderClient mock;
    const TaskFixture fx = build_task_fixture(spec, mock);
    const auto adapter = make_adapter(spec);
    StepClients clients{&mock, &mock, &mock};
    StepConfig config;
    config.hops = 1;
    try {
        step(fx.state, fx.action, *adapter, clients, config);
        FAIL("expected UnparseableResponse");
    } catch (const UnparseableResponseError& e) {
        CHECK(e.code() == Errc::UnparseableResponse);
        CHECK(e.response().text.rfind("maybe", 0) == 0);
    }
}

TEST_CASE("embedding staleness: patched nodes re-embed before similarity use") {
    GraphState state = embedded_pair();
    Transition t;
    t.kind = Transition::Kind::UpdateNodes;
    t.base_version = state.version();
    t.patches.push_back(NodePatch{"n1", std::string("fresh text"), std::nullopt, std::nullopt});
    const GraphState next = apply(state, t);

    MockDecoderClient mock(0, EmbedderDims{4, 4, 4});
    const GraphState repopulated = populate_embeddings(next, mock, EmbedderDims{4, 4, 4});
    REQUIRE(repopulated.node("n1").emb_text.has_value());
    // the refreshed slot reflects the new text, not the old cached vector
    CHECK(repopulated.node("n1").emb_text.value() !=
          std::vector<double>(4, 0.5));
}
