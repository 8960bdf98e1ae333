// Microbenchmarks for the propagation, retrieval, and prompt-assembly kernels.

#include <benchmark/benchmark.h>

#include "gwm/decoder_client.hpp"
#include "gwm/edge_builder.hpp"
#include "gwm/embed.hpp"
#include "gwm/projector.hpp"
#include "gwm/stable_hash.hpp"
#include "gwm/token_mp.hpp"

using namespace gwm;

namespace {

GraphState make_random_graph(std::size_t n, double avg_degree, std::uint64_t seed) {
    std::vector<MultiModalNode> nodes;
    nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        MultiModalNode node;
        node.id = "b" + std::to_string(i);
        node.text = "bench node";
        nodes.push_back(std::move(node));
    }
    GraphState state = add_nodes(GraphState{}, std::move(nodes));
    SplitMix rng(splitmix64(seed));
    const double p = avg_degree / static_cast<double>(n - 1);
    std::vector<Edge> edges;
    const auto order = state.node_order();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.next_unit() < p) {
                edges.push_back(Edge{order[i], order[j], EdgeKind::Explicit});
            }
        }
    }
    return add_edges(state, std::move(edges));
}

EmbeddingMatrix make_features(const GraphState& state, std::size_t d, std::uint64_t seed) {
    EmbeddingMatrix em;
    em.x = Matrix(state.node_count(), d);
    em.node_order = state.node_order();
    em.source_version = state.version();
    SplitMix rng(seed);
    for (auto& v : em.x.data) v = rng.next_signed_unit();
    return em;
}

void BM_NormalizeAdjacency(benchmark::State& bench) {
    const std::size_t n = static_cast<std::size_t>(bench.range(0));
    const GraphState state = make_random_graph(n, 8.0, 1);
    const Adjacency adj = adjacency(state);
    for (auto _ : bench) {
        benchmark::DoNotOptimize(normalize_adjacency(adj));
    }
    bench.SetComplexityN(static_cast<benchmark::IterationCount>(adj.matrix.nnz()));
}
BENCHMARK(BM_NormalizeAdjacency)->Arg(500)->Arg(2000)->Complexity(benchmark::oN);

void BM_Propagate(benchmark::State& bench) {
    const std::size_t n = static_cast<std::size_t>(bench.range(0));
    const std::size_t d = static_cast<std::size_t>(bench.range(1));
    const GraphState state = make_random_graph(n, 8.0, 2);
    const NormalizedAdjacency norm = normalize_adjacency(adjacency(state));
    const EmbeddingMatrix em = make_features(state, d, 3);
    for (auto _ : bench) {
        benchmark::DoNotOptimize(propagate(em, norm, 4));
    }
    bench.SetItemsProcessed(static_cast<std::int64_t>(bench.iterations()) *
                            static_cast<std::int64_t>(norm.matrix.nnz() * d * 4));
}
BENCHMARK(BM_Propagate)->Args({500, 64})->Args({2000, 64})->Args({2000, 256});

void BM_KnnImplicitEdges(benchmark::State& bench) {
    const std::size_t n = static_cast<std::size_t>(bench.range(0));
    std::vector<MultiModalNode> nodes;
    SplitMix rng(7);
    for (std::size_t i = 0; i < n; ++i) {
        MultiModalNode node;
        node.id = "k" + std::to_string(i);
        node.text = "bench";
        std::vector<double> v(64);
        for (auto& x : v) x = rng.next_signed_unit();
        node.emb_text = std::move(v);
        nodes.push_back(std::move(node));
    }
    const GraphState state = add_nodes(GraphState{}, std::move(nodes));
    for (auto _ : bench) {
        benchmark::DoNotOptimize(knn_implicit_edges(state, Modality::Text, 5, 0.0));
    }
}
BENCHMARK(BM_KnnImplicitEdges)->Arg(200)->Arg(400);

void BM_SpectralRadius(benchmark::State& bench) {
    const GraphState state = make_random_graph(2000, 8.0, 4);
    const NormalizedAdjacency norm = normalize_adjacency(adjacency(state));
    for (auto _ : bench) {
        benchmark::DoNotOptimize(spectral_radius_estimate(norm, 30, 5));
    }
}
BENCHMARK(BM_SpectralRadius);

void BM_Fuse(benchmark::State& bench) {
    const GraphState state = make_random_graph(500, 8.0, 6);
    const EmbeddingMatrix em = make_features(state, 256, 7);
    const HopStack stack = propagate(em, normalize_adjacency(adjacency(state)), 4);
    const Projector projector = Projector::seeded(256, 512, 4, 8);
    const TargetScope scope = TargetScope::graph();
    for (auto _ : bench) {
        benchmark::DoNotOptimize(fuse(stack, projector, scope));
    }
}
BENCHMARK(BM_Fuse);

void BM_TokenMessagePass(benchmark::State& bench) {
    const std::size_t leaves = static_cast<std::size_t>(bench.range(0));
    GraphState state;
    MultiModalNode hub;
    hub.id = "hub";
    hub.text = "hub";
    state = add_node(state, hub);
    std::vector<MultiModalNode> nodes;
    std::vector<Edge> spokes;
    for (std::size_t i = 0; i < leaves; ++i) {
        MultiModalNode node;
        node.id = "l" + std::to_string(i);
        node.text = "a leaf sentence with a handful of words " + std::to_string(i);
        nodes.push_back(std::move(node));
        spokes.push_back(Edge{"hub", "l" + std::to_string(i), EdgeKind::Explicit});
    }
    state = add_edges(add_nodes(state, std::move(nodes)), std::move(spokes));
    MockDecoderClient mock;
    std::map<std::string, UnifiedTextNode> unified;
    for (const auto& id : state.node_order()) {
        unified.emplace(id, unify_node_text(state.node(id), mock));
    }
    TokenBudget budget;
    for (auto _ : bench) {
        benchmark::DoNotOptimize(token_message_pass(state, unified, "hub", 1, budget));
    }
}
BENCHMARK(BM_TokenMessagePass)->Arg(100)->Arg(500);

void BM_MockEmbed(benchmark::State& bench) {
    MockDecoderClient mock;
    std::size_t i = 0;
    for (auto _ : bench) {
        benchmark::DoNotOptimize(
            mock.embed(EmbedRequest{"text", "content " + std::to_string(i++ % 64)}));
    }
}
BENCHMARK(BM_MockEmbed);

} // namespace

BENCHMARK_MAIN();
