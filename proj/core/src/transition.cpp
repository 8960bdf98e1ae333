#include "gwm/transition.hpp"

#include <algorithm>
#include <fstream>

#include "gwm/edge_builder.hpp"
#include "gwm/embed.hpp"

#include "json.hpp"

namespace gwm {

const char* transition_kind_name(Transition::Kind kind) noexcept {
    switch (kind) {
        case Transition::Kind::UpdateNodes: return "update_nodes";
        case Transition::Kind::UpdateEdges: return "update_edges";
        case Transition::Kind::UpdateGraph: return "update_graph";
    }
    return "?";
}

GraphState apply(const GraphState& state, const Transition& transition) {
    if (transition.base_version != state.version()) {
        raise(Errc::StaleTransition,
              "transition built against version " + std::to_string(transition.base_version) +
                  ", state is at " + std::to_string(state.version()));
    }

    switch (transition.kind) {
        case Transition::Kind::UpdateNodes: {
            GraphState next = state;
            for (const auto& patch : transition.patches) {
                if (!state.has_node(patch.node_id)) {
                    raise(Errc::StaleTransition, "patch names unknown node '" + patch.node_id + "'");
                }
                MultiModalNode node = next.node(patch.node_id);
                if (patch.text) {
                    node.text = patch.text;
                    node.emb_text.reset();  // clear-on-write; re-embedding is the caller's call
                }
                if (patch.table) {
                    node.table = patch.table;
                    node.emb_table.reset();
                }
                if (patch.image_ref) {
                    node.image_ref = patch.image_ref;
                    node.emb_image.reset();
                }
                next = with_updated_node(next, node);
            }
            return with_version(next, state.version() + 1);
        }
        case Transition::Kind::UpdateEdges: {
            GraphState next = state;
            for (const auto& e : transition.remove_edges) {
                if (!next.has_edge(e.src, e.dst, e.kind, e.edge_type)) {
                    raise(Errc::StaleTransition,
                          "transition removes absent edge (" + e.src + "," + e.dst + ")");
                }
                next = remove_edge(next, e.src, e.dst, e.kind, e.edge_type);
            }
            for (const auto& e : transition.add_edges) {
                next = add_edge(next, e);
            }
            return with_version(next, state.version() + 1);
        }
        case Transition::Kind::UpdateGraph: {
            GraphState next = state;
            for (const auto& n : transition.new_nodes) {
                next = add_node(next, n);
            }
            for (const auto& e : transition.add_edges) {
                next = add_edge(next, e);
            }
            return with_version(next, state.version() + 1);
        }
    }
    raise(Errc::StaleTransition, "unknown transition kind");
}

namespace {

using nlohmann::ordered_json;

ordered_json edge_to_json(const Edge& e) {
    ordered_json out;
    out["src"] = e.src;
    out["dst"] = e.dst;
    out["kind"] = edge_kind_name(e.kind);
    out["weight"] = e.weight;
    if (e.edge_type) out["edge_type"] = *e.edge_type;
    return out;
}

Edge edge_from_json(const nlohmann::json& j) {
    Edge e;
    e.src = j.at("src").get<std::string>();
    e.dst = j.at("dst").get<std::string>();
    e.kind = edge_kind_from_name(j.at("kind").get<std::string>());
    e.weight = j.value("weight", 1.0);
    if (j.contains("edge_type")) e.edge_type = j["edge_type"].get<std::string>();
    return e;
}

} // namespace

void append_transition_log(const std::string& path, const Transition& t) {
    ordered_json line;
    line["kind"] = transition_kind_name(t.kind);
    line["base_version"] = t.base_version;
    line["provenance"] = {{"action_id", t.provenance.action_id},
                          {"response_id", t.provenance.response_id}};
    if (!t.patches.empty()) {
        line["patches"] = ordered_json::array();
        for (const auto& p : t.patches) {
            ordered_json pj;
            pj["node_id"] = p.node_id;
            if (p.text) pj["text"] = *p.text;
            if (p.table) {
                pj["table"] = {{"columns", p.table->columns}, {"values", p.table->values}};
            }
            if (p.image_ref) pj["image_ref"] = *p.image_ref;
            line["patches"].push_back(std::move(pj));
        }
    }
    if (!t.remove_edges.empty()) {
        line["remove_edges"] = ordered_json::array();
        for (const auto& e : t.remove_edges) line["remove_edges"].push_back(edge_to_json(e));
    }
    if (!t.add_edges.empty()) {
        line["add_edges"] = ordered_json::array();
        for (const auto& e : t.add_edges) line["add_edges"].push_back(edge_to_json(e));
    }
    if (!t.new_nodes.empty()) {
        line["new_nodes"] = ordered_json::array();
        for (const auto& n : t.new_nodes) {
            ordered_json nj;
            nj["id"] = n.id;
            if (n.text) nj["text"] = *n.text;
            if (n.table) nj["table"] = {{"columns", n.table->columns}, {"values", n.table->values}};
            if (n.image_ref) nj["image_ref"] = *n.image_ref;
            line["new_nodes"].push_back(std::move(nj));
        }
    }

    std::ofstream os(path, std::ios::app);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for append");
    }
    os << line.dump() << "\n";
}

std::vector<Transition> read_transition_log(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    std::vector<Transition> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            raise(Errc::SchemaViolation, "bad transition log line: " + line.substr(0, 80));
        }
        Transition t;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "update_nodes") {
            t.kind = Transition::Kind::UpdateNodes;
        } else if (kind == "update_edges") {
            t.kind = Transition::Kind::UpdateEdges;
        } else if (kind == "update_graph") {
            t.kind = Transition::Kind::UpdateGraph;
        } else {
            raise(Errc::SchemaViolation, "unknown transition kind '" + kind + "'");
        }
        t.base_version = j.at("base_version").get<std::uint64_t>();
        if (j.contains("provenance")) {
            t.provenance.action_id = j["provenance"].value("action_id", "");
            t.provenance.response_id = j["provenance"].value("response_id", "");
        }
        for (const auto& pj : j.value("patches", nlohmann::json::array())) {
            NodePatch p;
            p.node_id = pj.at("node_id").get<std::string>();
            if (pj.contains("text")) p.text = pj["text"].get<std::string>();
            if (pj.contains("table")) {
                TablePayload table;
                table.columns = pj["table"].at("columns").get<std::vector<std::string>>();
                table.values = pj["table"].at("values").get<std::vector<std::string>>();
                p.table = std::move(table);
            }
            if (pj.contains("image_ref")) p.image_ref = pj["image_ref"].get<std::string>();
            t.patches.push_back(std::move(p));
        }
        for (const auto& ej : j.value("remove_edges", nlohmann::json::array())) {
            t.remove_edges.push_back(edge_from_json(ej));
        }
        for (const auto& ej : j.value("add_edges", nlohmann::json::array())) {
            t.add_edges.push_back(edge_from_json(ej));
        }
        for (const auto& nj : j.value("new_nodes", nlohmann::json::array())) {
            MultiModalNode n;
            n.id = nj.at("id").get<std::string>();
            if (nj.contains("text")) n.text = nj["text"].get<std::string>();
            if (nj.contains("table")) {
                TablePayload table;
                table.columns = nj["table"].at("columns").get<std::vector<std::string>>();
                table.values = nj["table"].at("values").get<std::vector<std::string>>();
                n.table = std::move(table);
            }
            if (nj.contains("image_ref")) n.image_ref = nj["image_ref"].get<std::string>();
            t.new_nodes.push_back(std::move(n));
        }
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

// Rendered text of one target node for prompt assembly.
std::string target_text_token_mp(const GraphState& state, const std::string& id,
                                 std::size_t hops, const TokenBudget& budget,
                                 DecoderClient& captioner) {
    std::map<std::string, UnifiedTextNode> unified;
    // unify the center and everything within `hops` neighbor links
    std::set<std::string> frontier{id};
    std::set<std::string> seen{id};
    for (std::size_t hop = 0; hop < hops && !frontier.empty(); ++hop) {
        std::set<std::string> next;
        for (const auto& v : frontier) {
            for (const auto& u : state.neighbor_ids(v)) {
                if (seen.insert(u).second) next.insert(u);
            }
        }
        frontier = std::move(next);
    }
    for (const auto& v : seen) {
        unified.emplace(v, unify_node_text(state.node(v), captioner));
    }
    return token_message_pass(state, unified, id, hops, budget);
}

} // namespace

AssembledStep assemble_step(const GraphState& state, const ActionNode& action,
                            const TaskAdapter& adapter, const StepClients& clients,
                            const StepConfig& config) {
    if (clients.llm == nullptr || clients.embedder == nullptr) {
        raise(Errc::DecoderUnavailable, "step needs llm and embedder clients");
    }
    const bool image_task = adapter.wants_image_decoder();
    const TemplateRegistry builtin = TemplateRegistry::builtin();
    const TemplateRegistry& registry = config.registry ? *config.registry : builtin;

    // resolve
    GraphState working = state;
    std::optional<std::vector<double>> query_embedding;
    if (!action.is_intended()) {
        // similarity resolution reads node embedding slots
        working = populate_embeddings(working, *clients.embedder, config.dims);
        const auto raw =
            clients.embedder->embed(EmbedRequest{"text", action.unintended().query_text}).vector;
        if (config.resolve.text_only) {
            query_embedding = raw;
        } else {
            // pad the text-space query into the concat layout
            const ConcatLayout layout = concat_layout(working);
            if (layout.text != raw.size()) {
                raise(Errc::DimensionMismatch,
                      "query embedding dim " + std::to_string(raw.size()) +
                          " vs text layout width " + std::to_string(layout.text));
            }
            std::vector<double> padded(layout.total(), 0.0);
            std::copy(raw.begin(), raw.end(),
                      padded.begin() + static_cast<std::ptrdiff_t>(layout.image));
            query_embedding = std::move(padded);
        }
    }
    const std::vector<StateNodeRef> targets =
        resolve_targets(working, action, query_embedding, config.resolve);

    // message passing + prompt assembly
    std::vector<std::string> target_texts;
    std::optional<GraphTokens> tokens;
    if (config.pipeline == Pipeline::TokenMP) {
        // The final prompt must fit the budget, so each target's message pass
        // gets an equal slice of what the rendered template leaves over. The
        // margin absorbs tokens merged or split at slot boundaries.
        const std::vector<std::string> empty_texts(targets.size(), "");
        const auto skeleton_slots = adapter.prompt_slots(working, action, targets, empty_texts);
        const std::string skeleton = render_action_prompt(action, skeleton_slots, registry);
        const std::size_t overhead = count_tokens(config.budget, skeleton);
        const std::size_t margin = 2 * targets.size() + 2;
        if (overhead + margin + targets.size() > config.budget.max_tokens) {
            raise(Errc::BudgetTooSmallForCenter,
                  "action template alone exceeds the token budget");
        }
        TokenBudget slice = config.budget;
        slice.max_tokens = (config.budget.max_tokens - overhead - margin) /
                           std::max<std::size_t>(targets.size(), 1);
        for (const auto& t : targets) {
            target_texts.push_back(
                target_text_token_mp(working, t.node_id, config.hops, slice, *clients.llm));
        }
    } else {
        working = populate_embeddings(working, *clients.embedder, config.dims);
        const EmbeddingMatrix x = assemble_embeddings(working, *clients.embedder, config.dims);

        TargetScope scope;
        if (action.is_intended() && action.intended().level == ActionLevel::Node) {
            scope = TargetScope::node(targets[0].node_id);
        } else if (action.is_intended() && action.intended().level == ActionLevel::Edge) {
            scope = TargetScope::edge(targets[0].node_id, targets[1].node_id);
        } else {
            std::vector<std::string> ids;
            for (const auto& t : targets) ids.push_back(t.node_id);
            scope = TargetScope::graph(std::move(ids));
        }

        const std::size_t out_dim =
            config.decoder_dim ? config.decoder_dim : (image_task ? std::size_t{768} : std::size_t{4096});
        Projector seeded;
        const Projector* projector = config.projector;
        if (projector == nullptr) {
            seeded = Projector::seeded(config.dims.total(), out_dim, config.hops,
                                       config.projector_seed);
            projector = &seeded;
        }

        // heterogeneous graphs aggregate separately per edge type; the fused
        // token sequences flatten one after another
        GraphTokens flattened;
        flattened.dim = projector->output_dim;
        for (const auto& channel : propagation_channels(working)) {
            const HopStack stack = propagate(x, channel.normalized, config.hops);
            GraphTokens fused = fuse(stack, *projector, scope);
            for (auto& t : fused.tokens) {
                flattened.tokens.push_back(std::move(t));
            }
        }
        tokens = std::move(flattened);
        // node content rides the soft tokens; text slots carry a marker
        for (std::size_t i = 0; i < targets.size(); ++i) {
            target_texts.push_back("<graph tokens>");
        }
    }

    const std::map<std::string, std::string> slots =
        adapter.prompt_slots(working, action, targets, target_texts);

    AssembledStep assembled;
    assembled.targets = targets;
    assembled.target_texts = target_texts;
    assembled.tokens = std::move(tokens);
    assembled.prompt = render_action_prompt(action, slots, registry);
    if (count_tokens(config.budget, assembled.prompt) > config.budget.max_tokens) {
        raise(Errc::BudgetTooSmallForCenter, "assembled action prompt exceeds the token budget");
    }
    return assembled;
}

StepResult step(const GraphState& state, const ActionNode& action, const TaskAdapter& adapter,
                const StepClients& clients, const StepConfig& config) {
    const bool image_task = adapter.wants_image_decoder();
    if (image_task && clients.image == nullptr) {
        raise(Errc::DecoderUnavailable, "step needs the image decoder for this task");
    }
    AssembledStep assembled = assemble_step(state, action, adapter, clients, config);
    const std::string& prompt = assembled.prompt;
    const std::vector<StateNodeRef>& targets = assembled.targets;

    // decode; any client failure leaves the input state untouched
    DecoderResponse response;
    if (image_task) {
        GenerateImageRequest req;
        req.prompt = prompt;
        if (assembled.tokens) {
            req.condition_tokens = assembled.tokens->tokens;
        }
        response = clients.image->generate_image(req);
    } else {
        CompleteRequest req;
        req.prompt = prompt;
        req.max_tokens = config.budget.max_tokens;
        if (assembled.tokens) {
            req.graph_tokens = assembled.tokens->tokens;
        }
        response = clients.llm->complete(req);
    }

    // parse + apply
    StepOutcome outcome = [&]() -> StepOutcome {
        try {
            return adapter.parse(state, action, targets, response);
        } catch (const UnparseableResponseError&) {
            throw;
        } catch (const Error& e) {
            if (e.code() == Errc::UnparseableResponse) {
                throw UnparseableResponseError(e.what(), response);
            }
            throw;
        }
    }();

    StepResult result;
    result.response = response;
    result.prompt = prompt;
    if (std::holds_alternative<Transition>(outcome)) {
        Transition transition = std::get<Transition>(std::move(outcome));
        transition.base_version = state.version();
        transition.provenance.action_id = action.id;
        transition.provenance.response_id = response.request_id;
        result.state = apply(state, transition);
        result.transition = std::move(transition);
    } else {
        result.state = state;  // predictions leave the world unchanged
        result.record = std::get<PredictionRecord>(std::move(outcome));
    }
    return result;
}

} // namespace gwm
