#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gwm/transition.hpp"

namespace gwm {

enum class TaskKind {
    Rag,
    Recommendation,
    NodePrediction,
    EdgePrediction,
    GraphPrediction,
    Planning,
    MultiModalGeneration,
    MultiModalMatching,
    MultiAgent,
};

const char* task_kind_name(TaskKind kind) noexcept;
TaskKind task_kind_from_name(const std::string& name);

// Deterministic fixture recipes. Every field is seeded; fixtures shaped like
// the real datasets but desk-sized.
struct RagFixtureSpec {
    std::size_t chunks = 12;
    std::size_t words_per_chunk = 30;
    std::string answer = "the hidden answer is mercury";
    std::uint64_t seed = 1;
    std::size_t k = 5;
    double threshold = 0.0;
};

struct RecFixtureSpec {
    std::size_t users = 3;
    std::size_t items = 2;
    std::uint64_t seed = 1;
    std::string planted_answer = "yes";
};

struct SyntheticGraphSpec {
    std::size_t nodes = 200;
    double avg_degree = 6.0;
    std::size_t feature_dim = 8;
    double signal = 1.0;
    double noise = 1.0;
    std::string label_rule = "neighbor_majority";  // or "own_sign"
    bool with_edges = true;
    std::uint64_t seed = 1;
};

struct GenericFixtureSpec {
    std::string planted_answer;
    std::uint64_t seed = 1;
};

// One task instantiation: how to build its graph, which action template it
// uses, how decoder answers parse, and what it reports.
struct TaskSpec {
    TaskKind task = TaskKind::Rag;
    std::string template_id = "rag";
    std::string parser_id = "free-text";  // edge-yes-no | label-match | free-text | image-node
    std::vector<std::string> labels;
    std::vector<std::string> metrics = {"accuracy"};

    RagFixtureSpec rag;
    RecFixtureSpec rec;
    GenericFixtureSpec generic;

    static TaskSpec defaults(TaskKind kind);
};

TaskSpec load_task_spec(const std::string& path);
void save_task_spec(const TaskSpec& spec, const std::string& path);

// ---- graph builders -----------------------------------------------------------

// Splits the document into contiguous chunks of ~chunk_tokens whitespace
// tokens (boundaries at whitespace), embeds them, and links chunks by kNN
// cosine similarity. k is clamped to node_count-1.
GraphState build_rag_graph(const std::string& document, std::size_t chunk_tokens,
                           DecoderClient& embedder, std::size_t k = 5, double threshold = 0.0);

// User/item nodes with "interaction" edges.
GraphState build_bipartite_rec_graph(
    const std::vector<std::pair<std::string, std::string>>& interactions,
    const std::vector<MultiModalNode>& user_payloads,
    const std::vector<MultiModalNode>& item_payloads);

// Planted-answer RAG document; returns the document and the answer chunk's
// exact text (which doubles as the retrieval query).
struct PlantedRagDocument {
    std::string document;
    std::string answer_chunk_text;
    std::size_t answer_chunk_index = 0;
};
PlantedRagDocument make_planted_rag_document(const RagFixtureSpec& spec);

// Fixture graph plus the action that drives it.
struct TaskFixture {
    GraphState state;
    ActionNode action;
};
TaskFixture build_task_fixture(const TaskSpec& spec, DecoderClient& embedder);

// ---- answer parsing -------------------------------------------------------------

StepOutcome parse_decoder_answer(const TaskSpec& spec, const DecoderResponse& response,
                                 const std::vector<StateNodeRef>& targets);

std::unique_ptr<TaskAdapter> make_adapter(const TaskSpec& spec);

// ---- hop ablation harness ---------------------------------------------------------

struct ProbeConfig {
    double ridge_lambda = 1e-3;
    double train_fraction = 0.6;
    std::size_t splits = 5;  // held-out accuracy averages over this many seeded splits
};

struct SyntheticFixture {
    GraphState state;
    EmbeddingMatrix features;
    std::vector<int> labels;  // +1 / -1
};

SyntheticFixture build_synthetic_fixture(const SyntheticGraphSpec& spec);

// Closed-form ridge classifier on concatenated hop features [X..X^(L)];
// returns held-out accuracy.
double linear_probe_accuracy(const HopStack& stack, std::size_t use_hops,
                             const std::vector<int>& labels, const ProbeConfig& probe,
                             std::uint64_t split_seed);

struct AblationRow {
    std::string task;
    std::size_t hops = 0;
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
};

// For each L in hop_values (0 = no graph), builds the hop stack and reports
// the probe's held-out accuracy.
AblationReport hop_ablation(const SyntheticGraphSpec& fixture,
                            const std::vector<std::size_t>& hop_values, const ProbeConfig& probe,
                            std::uint64_t seed);

// CSV with header "task,L,metric,value,seed".
std::string ablation_csv(const AblationReport& report);

SyntheticGraphSpec load_synthetic_spec(const std::string& path);
void save_synthetic_spec(const SyntheticGraphSpec& spec, const std::string& path);

// The shipped over-smoothing diagnostic graph: a triangle with a pendant
// path, connected and non-bipartite.
GraphState triangle_with_pendant_path(std::size_t path_len = 2);

} // namespace gwm
