#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gwm/action.hpp"
#include "gwm/decoder_client.hpp"
#include "gwm/graph.hpp"
#include "gwm/projector.hpp"
#include "gwm/token_mp.hpp"

namespace gwm {

// One node's modality rewrite. Set fields replace the node's payloads and
// clear the matching embedding slots (stale caches never survive a write).
struct NodePatch {
    std::string node_id;
    std::optional<std::string> text;
    std::optional<TablePayload> table;
    std::optional<std::string> image_ref;
};

// An explicit, replayable state delta. Applying a transition to the snapshot
// it was built against yields the successor state; anything else is stale.
struct Transition {
    enum class Kind { UpdateNodes, UpdateEdges, UpdateGraph };

    Kind kind = Kind::UpdateNodes;
    std::uint64_t base_version = 0;

    std::vector<NodePatch> patches;        // UpdateNodes
    std::vector<Edge> add_edges;           // UpdateEdges / UpdateGraph
    std::vector<Edge> remove_edges;        // UpdateEdges (applied before adds)
    std::vector<MultiModalNode> new_nodes; // UpdateGraph

    struct Provenance {
        std::string action_id;
        std::string response_id;
    } provenance;
};

const char* transition_kind_name(Transition::Kind kind) noexcept;

GraphState apply(const GraphState& state, const Transition& transition);

// JSON-lines transition log (one transition per line, with provenance).
void append_transition_log(const std::string& path, const Transition& transition);
std::vector<Transition> read_transition_log(const std::string& path);

// Decoder output that does not change the state (classification labels,
// generated free text).
struct PredictionRecord {
    std::string task;
    std::vector<std::string> target_ids;
    std::string label;  // empty for free text
    std::string text;
    std::string response_id;
};

using StepOutcome = std::variant<Transition, PredictionRecord>;

// Raised when the decoder's text matches nothing the task accepts; carries
// the response so callers can inspect it. The state is left unchanged.
class UnparseableResponseError : public Error {
public:
    UnparseableResponseError(const std::string& message, DecoderResponse response)
        : Error(Errc::UnparseableResponse, message), response_(std::move(response)) {}
    const DecoderResponse& response() const { return response_; }

private:
    DecoderResponse response_;
};

// Task-specific halves of a step: which decoder to call, how target texts map
// onto template slots, and how to read the decoder's answer.
class TaskAdapter {
public:
    virtual ~TaskAdapter() = default;

    virtual std::string task_name() const = 0;

    // true: the step calls the image decoder instead of the LLM.
    virtual bool wants_image_decoder() const { return false; }

    // Template slot values for the resolved targets. target_texts holds one
    // rendered text per target, in target order.
    virtual std::map<std::string, std::string> prompt_slots(
        const GraphState& state, const ActionNode& action,
        const std::vector<StateNodeRef>& targets,
        const std::vector<std::string>& target_texts) const = 0;

    // Parses the decoder response; raises UnparseableResponse when the text
    // matches nothing the task accepts.
    virtual StepOutcome parse(const GraphState& state, const ActionNode& action,
                              const std::vector<StateNodeRef>& targets,
                              const DecoderResponse& response) const = 0;
};

enum class Pipeline { TokenMP, EmbedMP };

struct StepClients {
    DecoderClient* llm = nullptr;       // completion + captioning
    DecoderClient* image = nullptr;     // image generation
    DecoderClient* embedder = nullptr;  // embeddings
};

struct StepConfig {
    Pipeline pipeline = Pipeline::TokenMP;
    std::size_t hops = 4;
    TokenBudget budget;
    EmbedderDims dims;
    ResolveOptions resolve;
    const TemplateRegistry* registry = nullptr;  // defaults to the builtin set
    const Projector* projector = nullptr;        // EmbedMP; defaults to a seeded one
    std::uint64_t projector_seed = 7;
    std::size_t decoder_dim = 0;  // EmbedMP token dim; 0 = 4096 text / 768 image
};

struct StepResult {
    GraphState state;  // successor (or the input state for pure predictions)
    DecoderResponse response;
    std::optional<Transition> transition;
    std::optional<PredictionRecord> record;
    std::string prompt;  // decoder input, for inspection
};

// The decoder input a step would send, without calling the decoder.
struct AssembledStep {
    std::vector<StateNodeRef> targets;
    std::vector<std::string> target_texts;
    std::optional<GraphTokens> tokens;  // EmbedMP only
    std::string prompt;
};

AssembledStep assemble_step(const GraphState& state, const ActionNode& action,
                            const TaskAdapter& adapter, const StepClients& clients,
                            const StepConfig& config);

// Resolve -> message-pass -> prompt/fuse -> decode -> parse -> apply. On any
// failure the input state is returned unchanged inside the raised error path;
// the returned state's version changes only when a transition applied.
StepResult step(const GraphState& state, const ActionNode& action, const TaskAdapter& adapter,
                const StepClients& clients, const StepConfig& config);

} // namespace gwm
