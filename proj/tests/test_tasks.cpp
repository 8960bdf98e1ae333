#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "gwm/stable_hash.hpp"
#include "gwm/tasks.hpp"

#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gwm;
using helpers::text_node;

TEST_CASE("rag: a ten-token document under a large chunk size is one node, no edges") {
    MockDecoderClient mock;
    const GraphState state =
        build_rag_graph("one two three four five six seven eight nine ten", 100, mock, 5, 0.0);
    CHECK(state.node_count() == 1);
    CHECK(state.edge_count() == 0);
    CHECK(state.node("chunk-0000").text.value() ==
          "one two three four five six seven eight nine ten");
}

TEST_CASE("rag: chunk boundaries fall on whitespace at the token target") {
    MockDecoderClient mock;
    std::string doc;
    for (int i = 0; i < 40; ++i) doc += "tok" + std::to_string(i) + " ";
    const GraphState state = build_rag_graph(doc, 16, mock, 2, 0.0);
    CHECK(state.node_count() == 3);  // 16 + 16 + 8
    CHECK(state.node("chunk-0000").text.value().substr(0, 4) == "tok0");
    CHECK(state.node("chunk-0001").text.value().substr(0, 5) == "tok16");
    // node ids follow document order
    CHECK(state.node_order() ==
          std::vector<std::string>{"chunk-0000", "chunk-0001", "chunk-0002"});
}

TEST_CASE("rag: identical paragraphs produce pairwise-1 similarities and tie-broken edges") {
    MockDecoderClient mock;
    std::string para;
    for (int i = 0; i < 16; ++i) para += "same ";
    std::string doc;
    for (int i = 0; i < 5; ++i) doc += para;
    const GraphState state = build_rag_graph(doc, 16, mock, 1, 0.0);
    CHECK(state.node_count() == 5);
    // all five chunks carry identical text, so every similarity is exactly 1
    for (const auto& e : state.edges()) {
        CHECK(e.weight == doctest::Approx(1.0));
        CHECK(e.kind == EdgeKind::Implicit);
    }
    // k=1 with ties broken by id: every chunk picks chunk-0000 (which picks chunk-0001)
    CHECK(state.edge_count() == 4);
    for (std::size_t i = 1; i < 5; ++i) {
        CHECK(state.has_edge("chunk-0000", state.node_order()[i], EdgeKind::Implicit));
    }
}

TEST_CASE("rag: empty documents and tiny chunk sizes are rejected") {
    MockDecoderClient mock;
    try {
        build_rag_graph("   \n\t  ", 32, mock, 5, 0.0);
        FAIL("expected EmptyDocument");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyDocument);
    }
    CHECK_THROWS_AS(build_rag_graph("words", 8, mock, 5, 0.0), Error);
}

TEST_CASE("rag: planted answer chunk is retrieved top-1 under the mock embedder") {
    RagFixtureSpec spec;
    spec.chunks = 12;
    spec.words_per_chunk = 24;
    spec.seed = 5;
    const PlantedRagDocument doc = make_planted_rag_document(spec);
    MockDecoderClient mock;
    const GraphState state =
        build_rag_graph(doc.document, spec.words_per_chunk, mock, spec.k, spec.threshold);
    REQUIRE(state.node_count() == 12);

    ActionNode action;
    action.id = "q";
    action.kind = UnintendedAction{doc.answer_chunk_text, 5};
    action.template_id = "rag";
    const auto query = mock.embed(EmbedRequest{"text", doc.answer_chunk_text}).vector;
    ResolveOptions opts;
    opts.text_only = true;
    const auto targets = resolve_targets(state, action, query, opts);
    REQUIRE(targets.size() == 5);
    char expected_id[32];
    std::snprintf(expected_id, sizeof(expected_id), "chunk-%04zu", doc.answer_chunk_index);
    CHECK(targets[0].node_id == expected_id);

    // the returned ranking equals the brute-force cosine ranking end to end
    std::vector<std::vector<double>> vectors;
    for (const auto& id : state.node_order()) {
        vectors.push_back(state.node(id).emb_text.value());
    }
    const auto expected = oracle::brute_force_ranking(query, vectors, state.node_order(), 5);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(targets[i].node_id == expected[i]);
    }
}

TEST_CASE("bipartite: one user, one item, one interaction is K2") {
    std::vector<MultiModalNode> users = {text_node("u1", "user one")};
    std::vector<MultiModalNode> items = {text_node("i1", "item one")};
    const GraphState state = build_bipartite_rec_graph({{"u1", "i1"}}, users, items);
    CHECK(state.node_count() == 2);
    CHECK(state.edge_count() == 1);
    CHECK(state.edges()[0].edge_type.value() == "interaction");
}

TEST_CASE("bipartite: full 3x2 matches the combinatorial degree oracle") {
    std::vector<MultiModalNode> users, items;
    std::vector<std::pair<std::string, std::string>> interactions;
    for (int u = 0; u < 3; ++u) users.push_back(text_node("u" + std::to_string(u), "user"));
    for (int i = 0; i < 2; ++i) items.push_back(text_node("i" + std::to_string(i), "item"));
    for (int u = 0; u < 3; ++u) {
        for (int i = 0; i < 2; ++i) {
            interactions.push_back({"u" + std::to_string(u), "i" + std::to_string(i)});
        }
    }
    const GraphState state = build_bipartite_rec_graph(interactions, users, items);
    CHECK(state.edge_count() == 6);
    for (int u = 0; u < 3; ++u) {
        CHECK(state.neighbor_ids("u" + std::to_string(u)).size() == 2);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(state.neighbor_ids("i" + std::to_string(i)).size() == 3);
    }
}

TEST_CASE("bipartite: duplicates deduplicate, dangling interactions raise") {
    std::vector<MultiModalNode> users = {text_node("u1", "user")};
    std::vector<MultiModalNode> items = {text_node("i1", "item")};
    const GraphState state =
        build_bipartite_rec_graph({{"u1", "i1"}, {"u1", "i1"}}, users, items);
    CHECK(state.edge_count() == 1);
    try {
        build_bipartite_rec_graph({{"u1", "ghost"}}, users, items);
        FAIL("expected DanglingInteraction");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DanglingInteraction);
    }
}

TEST_CASE("parse table: yes adds the edge, no records, anything else is unparseable") {
    const TaskSpec rec = TaskSpec::defaults(TaskKind::Recommendation);
    const std::vector<StateNodeRef> targets = {{"u1"}, {"i1"}};

    DecoderResponse yes;
    yes.text = "Yes, definitely.";
    const StepOutcome added = parse_decoder_answer(rec, yes, targets);
    REQUIRE(std::holds_alternative<Transition>(added));
    const Transition& t = std::get<Transition>(added);
    CHECK(t.kind == Transition::Kind::UpdateEdges);
    REQUIRE(t.add_edges.size() == 1);
    CHECK(t.add_edges[0].src == "u1");
    CHECK(t.add_edges[0].edge_type.value() == "interaction");

    DecoderResponse no;
    no.text = "no";
    const StepOutcome skipped = parse_decoder_answer(rec, no, targets);
    REQUIRE(std::holds_alternative<PredictionRecord>(skipped));
    CHECK(std::get<PredictionRecord>(skipped).label == "no");

    DecoderResponse shrug;
    shrug.text = "maybe";
    try {
        parse_decoder_answer(rec, shrug, targets);
        FAIL("expected UnparseableResponse");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnparseableResponse);
    }
}

TEST_CASE("parse table: labels match longest against the label set") {
    const TaskSpec node_task = TaskSpec::defaults(TaskKind::NodePrediction);
    DecoderResponse resp;
    resp.text = "Theory, although reinforcement learning is close.";
    const StepOutcome out = parse_decoder_answer(node_task, resp, {{"p0"}});
    REQUIRE(std::holds_alternative<PredictionRecord>(out));
    // "Reinforcement Learning" is longer than "Theory" and present: longest wins
    CHECK(std::get<PredictionRecord>(out).label == "Reinforcement Learning");

    DecoderResponse plain;
    plain.text = "Theory";
    CHECK(std::get<PredictionRecord>(parse_decoder_answer(node_task, plain, {{"p0"}})).label ==
          "Theory");

    DecoderResponse junk;
    junk.text = "Astrology";
    CHECK_THROWS_AS(parse_decoder_answer(node_task, junk, {{"p0"}}), Error);
}

TEST_CASE("parse table: image tasks require an image_ref") {
    const TaskSpec gen = TaskSpec::defaults(TaskKind::MultiModalGeneration);
    DecoderResponse with_image;
    with_image.image_ref = "mockimg-abc";
    const StepOutcome out = parse_decoder_answer(gen, with_image, {{"e0"}});
    REQUIRE(std::holds_alternative<Transition>(out));
    CHECK(std::get<Transition>(out).patches[0].image_ref.value() == "mockimg-abc");

    DecoderResponse empty;
    CHECK_THROWS_AS(parse_decoder_answer(gen, empty, {{"e0"}}), Error);
}

TEST_CASE("every task adapter round-trips build -> step -> parse on mock decoders") {
    MockDecoderClient mock;
    StepClients clients{&mock, &mock, &mock};
    for (TaskKind kind :
         {TaskKind::Rag, TaskKind::Recommendation, TaskKind::NodePrediction,
          TaskKind::EdgePrediction, TaskKind::GraphPrediction, TaskKind::Planning,
          TaskKind::MultiModalGeneration, TaskKind::MultiModalMatching, TaskKind::MultiAgent}) {
        CAPTURE(task_kind_name(kind));
        const TaskSpec spec = TaskSpec::defaults(kind);
        const TaskFixture fx = build_task_fixture(spec, mock);
        const auto adapter = make_adapter(spec);
        StepConfig config;
        config.hops = 1;
        // parse-strict tasks ride the token pipeline (planted answers live in
        // node text); free-text and image tasks exercise the embed pipeline
        config.pipeline = (spec.parser_id == "free-text" || spec.parser_id == "image-node")
                              ? Pipeline::EmbedMP
                              : Pipeline::TokenMP;
        const StepResult result = step(fx.state, fx.action, *adapter, clients, config);
        CHECK((result.transition.has_value() || result.record.has_value()));
        if (result.transition) {
            CHECK(result.state.version() == fx.state.version() + 1);
        } else {
            CHECK(result.state.version() == fx.state.version());
        }
    }
}

TEST_CASE("task specs round-trip through task.json files") {
    TaskSpec spec = TaskSpec::defaults(TaskKind::Rag);
    spec.rag.chunks = 9;
    spec.rag.answer = "the capital is quito";
    spec.rag.seed = 42;
    const std::string path = helpers::temp_path("task") + ".task.json";
    save_task_spec(spec, path);
    const TaskSpec loaded = load_task_spec(path);
    CHECK(loaded.task == TaskKind::Rag);
    CHECK(loaded.rag.chunks == 9);
    CHECK(loaded.rag.answer == "the capital is quito");
    CHECK(loaded.rag.seed == 42);
    CHECK(loaded.template_id == "rag");
    std::remove(path.c_str());
}

TEST_CASE("synthetic fixture: labels and structure are deterministic by seed") {
    SyntheticGraphSpec spec;
    spec.nodes = 50;
    spec.seed = 3;
    const SyntheticFixture a = build_synthetic_fixture(spec);
    const SyntheticFixture b = build_synthetic_fixture(spec);
    CHECK(a.labels == b.labels);
    CHECK(a.features.x.data == b.features.x.data);
    CHECK(a.state.edge_count() == b.state.edge_count());
    // no isolated nodes
    for (const auto& id : a.state.node_order()) {
        CHECK_FALSE(a.state.neighbor_ids(id).empty());
    }
}

TEST_CASE("linear probe agrees with the gauss-jordan ridge oracle") {
    SyntheticGraphSpec spec;
    spec.nodes = 60;
    spec.feature_dim = 5;
    spec.seed = 9;
    const SyntheticFixture fx = build_synthetic_fixture(spec);
    const HopStack stack =
        propagate(fx.features, normalize_adjacency(adjacency(fx.state)), 2);

    ProbeConfig probe;
    const std::uint64_t split_seed = 17;
    const double accuracy = linear_probe_accuracy(stack, 2, fx.labels, probe, split_seed);

    // recompute with an independent solver and the same deterministic split
    const std::size_t n = 60, d = 5, p = d * 3;
    oracle::Dense phi(n, p);
    for (std::size_t l = 0; l <= 2; ++l) {
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) phi.at(r, l * d + c) = stack.hops[l].at(r, c);
        }
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    SplitMix rng(splitmix64(split_seed) ^ 0x73706c6974ull);
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = rng.next_below(i + 1);
        std::swap(idx[i], idx[j]);
    }
    const std::size_t train_n = 36;  // round(0.6 * 60)
    oracle::Dense phi_train(train_n, p);
    std::vector<double> y_train(train_n);
    for (std::size_t t = 0; t < train_n; ++t) {
        for (std::size_t c = 0; c < p; ++c) phi_train.at(t, c) = phi.at(idx[t], c);
        y_train[t] = fx.labels[idx[t]];
    }
    const auto w = oracle::gauss_ridge_solve(phi_train, y_train, probe.ridge_lambda);
    std::size_t correct = 0;
    for (std::size_t t = train_n; t < n; ++t) {
        double score = 0.0;
        for (std::size_t c = 0; c < p; ++c) score += phi.at(idx[t], c) * w[c];
        if ((score >= 0.0 ? 1 : -1) == fx.labels[idx[t]]) ++correct;
    }
    const double expected = static_cast<double>(correct) / static_cast<double>(n - train_n);
    CHECK(accuracy == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ablation: a no-edge own-sign fixture scores identically at every hop count") {
    SyntheticGraphSpec spec;
    spec.nodes = 80;
    spec.label_rule = "own_sign";
    spec.with_edges = false;
    spec.seed = 2;
    const AblationReport report = hop_ablation(spec, {0, 1, 2, 4}, ProbeConfig{}, 1);
    REQUIRE(report.rows.size() == 4);
    for (const auto& row : report.rows) {
        CHECK(row.value == doctest::Approx(report.rows[0].value));
    }
}

TEST_CASE("ablation: planted neighborhood majority beats no-graph by 15+ points at L=2") {
    SyntheticGraphSpec spec;  // the shipped planted fixture shape
    spec.nodes = 300;
    spec.avg_degree = 6.0;
    spec.feature_dim = 8;
    const AblationReport report = hop_ablation(spec, {0, 2}, ProbeConfig{}, 1);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[1].value >= report.rows[0].value + 0.15);
}

TEST_CASE("ablation: accuracy at 16 hops does not exceed accuracy at 2") {
    SyntheticGraphSpec spec;  // the shipped over-smoothing ablation shape
    spec.nodes = 300;
    spec.avg_degree = 6.0;
    spec.feature_dim = 24;
    const AblationReport report = hop_ablation(spec, {0, 1, 2, 4, 8, 16}, ProbeConfig{}, 1);
    double acc2 = 0.0, acc16 = 0.0;
    for (const auto& row : report.rows) {
        if (row.hops == 2) acc2 = row.value;
        if (row.hops == 16) acc16 = row.value;
    }
    CHECK(acc16 <= acc2);
}

TEST_CASE("ablation: degenerate single-class fixtures are rejected") {
    SyntheticGraphSpec spec;
    spec.nodes = 12;
    spec.label_rule = "own_sign";
    spec.with_edges = false;
    spec.seed = 4;
    // force one class by flipping the rule through a fixture with all-equal latents:
    // seeds are involved, so instead check the probe guard directly
    SyntheticFixture fx = build_synthetic_fixture(spec);
    std::fill(fx.labels.begin(), fx.labels.end(), 1);
    HopStack stack;
    stack.hops = {fx.features.x};
    stack.hop_count = 0;
    stack.node_order = fx.features.node_order;
    try {
        linear_probe_accuracy(stack, 0, fx.labels, ProbeConfig{}, 1);
        FAIL("expected DegenerateFixture");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DegenerateFixture);
    }
}

TEST_CASE("ablation CSV carries the documented schema") {
    SyntheticGraphSpec spec;
    spec.nodes = 40;
    const AblationReport report = hop_ablation(spec, {0, 1}, ProbeConfig{}, 7);
    const std::string csv = ablation_csv(report);
    std::istringstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "task,L,metric,value,seed");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
        ++rows;
    }
    CHECK(rows == 2);
}

TEST_CASE("synthetic spec files round-trip") {
    SyntheticGraphSpec spec;
    spec.nodes = 123;
    spec.noise = 1.5;
    spec.label_rule = "own_sign";
    const std::string path = helpers::temp_path("synth") + ".json";
    save_synthetic_spec(spec, path);
    const SyntheticGraphSpec loaded = load_synthetic_spec(path);
    CHECK(loaded.nodes == 123);
    CHECK(loaded.noise == doctest::Approx(1.5));
    CHECK(loaded.label_rule == "own_sign");
    std::remove(path.c_str());
}

TEST_CASE("triangle-with-pendant-path fixture is connected and non-bipartite") {
    const GraphState state = triangle_with_pendant_path(2);
    CHECK(state.node_count() == 5);
    CHECK(state.edge_count() == 5);
    CHECK(state.has_edge("tri-a", "tri-c", EdgeKind::Explicit));  // odd cycle
    CHECK(state.has_edge("tri-c", "path-0000", EdgeKind::Explicit));
}
