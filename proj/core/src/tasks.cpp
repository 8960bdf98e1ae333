#include "gwm/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gwm/stable_hash.hpp"

#include "json.hpp"

namespace gwm {

const char* task_kind_name(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::Rag: return "rag";
        case TaskKind::Recommendation: return "recommendation";
        case TaskKind::NodePrediction: return "node-prediction";
        case TaskKind::EdgePrediction: return "edge-prediction";
        case TaskKind::GraphPrediction: return "graph-prediction";
        case TaskKind::Planning: return "planning";
        case TaskKind::MultiModalGeneration: return "multimodal-generation";
        case TaskKind::MultiModalMatching: return "multimodal-matching";
        case TaskKind::MultiAgent: return "multi-agent";
    }
    return "?";
}

TaskKind task_kind_from_name(const std::string& name) {
    for (TaskKind kind :
         {TaskKind::Rag, TaskKind::Recommendation, TaskKind::NodePrediction,
          TaskKind::EdgePrediction, TaskKind::GraphPrediction, TaskKind::Planning,
          TaskKind::MultiModalGeneration, TaskKind::MultiModalMatching, TaskKind::MultiAgent}) {
        if (name == task_kind_name(kind)) return kind;
    }
    raise(Errc::SchemaViolation, "unknown task '" + name + "'");
}

TaskSpec TaskSpec::defaults(TaskKind kind) {
    TaskSpec spec;
    spec.task = kind;
    switch (kind) {
        case TaskKind::Rag:
            spec.template_id = "rag";
            spec.parser_id = "free-text";
            break;
        case TaskKind::Recommendation:
            spec.template_id = "recommendation";
            spec.parser_id = "edge-yes-no";
            spec.rec.planted_answer = "yes";
            break;
        case TaskKind::NodePrediction:
            spec.template_id = "node-classification-papers";
            spec.parser_id = "label-match";
            spec.labels = {"Case Based",          "Genetic Algorithms", "Neural Networks",
                           "Probabilistic Methods", "Reinforcement Learning", "Rule Learning",
                           "Theory"};
            spec.generic.planted_answer = "Theory";
            break;
        case TaskKind::EdgePrediction:
            spec.template_id = "link-prediction";
            spec.parser_id = "edge-yes-no";
            spec.generic.planted_answer = "yes";
            break;
        case TaskKind::GraphPrediction:
            spec.template_id = "graph-classification-assay";
            spec.parser_id = "free-text";
            break;
        case TaskKind::Planning:
            spec.template_id = "planning";
            spec.parser_id = "free-text";
            break;
        case TaskKind::MultiModalGeneration:
            spec.template_id = "multimodal-generation";
            spec.parser_id = "image-node";
            break;
        case TaskKind::MultiModalMatching:
            spec.template_id = "multimodal-matching";
            spec.parser_id = "edge-yes-no";
            spec.generic.planted_answer = "yes";
            break;
        case TaskKind::MultiAgent:
            spec.template_id = "multi-agent";
            spec.parser_id = "free-text";
            break;
    }
    return spec;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string pad4(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return buf;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace

TaskSpec load_task_spec(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    json doc = json::parse(is, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("task")) {
        raise(Errc::SchemaViolation, "'" + path + "' is not a task fixture file");
    }
    TaskSpec spec = TaskSpec::defaults(task_kind_from_name(doc["task"].get<std::string>()));
    if (doc.contains("template_id")) spec.template_id = doc["template_id"].get<std::string>();
    if (doc.contains("parser")) spec.parser_id = doc["parser"].get<std::string>();
    if (doc.contains("labels")) spec.labels = doc["labels"].get<std::vector<std::string>>();
    if (doc.contains("metrics")) spec.metrics = doc["metrics"].get<std::vector<std::string>>();
    if (doc.contains("recipe")) {
        const json& r = doc["recipe"];
        auto get_size = [&](const char* key, std::size_t fallback) {
            return r.contains(key) ? r[key].get<std::size_t>() : fallback;
        };
        auto get_string = [&](const char* key, const std::string& fallback) {
            return r.contains(key) ? r[key].get<std::string>() : fallback;
        };
        auto get_seed = [&](std::uint64_t fallback) {
            return r.contains("seed") ? r["seed"].get<std::uint64_t>() : fallback;
        };
        spec.rag.chunks = get_size("chunks", spec.rag.chunks);
        spec.rag.words_per_chunk = get_size("words_per_chunk", spec.rag.words_per_chunk);
        spec.rag.answer = get_string("answer", spec.rag.answer);
        spec.rag.k = get_size("k", spec.rag.k);
        if (r.contains("threshold")) spec.rag.threshold = r["threshold"].get<double>();
        spec.rag.seed = get_seed(spec.rag.seed);
        spec.rec.users = get_size("users", spec.rec.users);
        spec.rec.items = get_size("items", spec.rec.items);
        spec.rec.planted_answer = get_string("planted_answer", spec.rec.planted_answer);
        spec.rec.seed = get_seed(spec.rec.seed);
        spec.generic.planted_answer = get_string("planted_answer", spec.generic.planted_answer);
        spec.generic.seed = get_seed(spec.generic.seed);
    }
    return spec;
}

void save_task_spec(const TaskSpec& spec, const std::string& path) {
    ordered_json doc;
    doc["task"] = task_kind_name(spec.task);
    doc["template_id"] = spec.template_id;
    doc["parser"] = spec.parser_id;
    doc["labels"] = spec.labels;
    doc["metrics"] = spec.metrics;
    ordered_json recipe;
    switch (spec.task) {
        case TaskKind::Rag:
            recipe["chunks"] = spec.rag.chunks;
            recipe["words_per_chunk"] = spec.rag.words_per_chunk;
            recipe["answer"] = spec.rag.answer;
            recipe["k"] = spec.rag.k;
            recipe["threshold"] = spec.rag.threshold;
            recipe["seed"] = spec.rag.seed;
            break;
        case TaskKind::Recommendation:
            recipe["users"] = spec.rec.users;
            recipe["items"] = spec.rec.items;
            recipe["planted_answer"] = spec.rec.planted_answer;
            recipe["seed"] = spec.rec.seed;
            break;
        default:
            recipe["planted_answer"] = spec.generic.planted_answer;
            recipe["seed"] = spec.generic.seed;
            break;
    }
    doc["recipe"] = std::move(recipe);
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for writing");
    }
    os << doc.dump(2) << "\n";
}

// ---- graph builders -----------------------------------------------------------

GraphState build_rag_graph(const std::string& document, std::size_t chunk_tokens,
                           DecoderClient& embedder, std::size_t k, double threshold) {
    if (chunk_tokens < 16) {
        raise(Errc::InvalidConfigValue, "chunk_tokens must be >= 16");
    }
    // word spans over the original document; chunk text preserves inner bytes
    struct Span {
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Span> words;
    std::size_t pos = 0;
    while (pos < document.size()) {
        while (pos < document.size() && std::isspace(static_cast<unsigned char>(document[pos]))) {
            ++pos;
        }
        if (pos >= document.size()) break;
        const std::size_t begin = pos;
        while (pos < document.size() && !std::isspace(static_cast<unsigned char>(document[pos]))) {
            ++pos;
        }
        words.push_back({begin, pos});
    }
    if (words.empty()) {
        raise(Errc::EmptyDocument, "document holds no tokens");
    }

    std::vector<MultiModalNode> chunks;
    for (std::size_t w = 0; w < words.size(); w += chunk_tokens) {
        const std::size_t last = std::min(w + chunk_tokens, words.size()) - 1;
        MultiModalNode node;
        node.id = "chunk-" + pad4(chunks.size());
        node.text = document.substr(words[w].begin, words[last].end - words[w].begin);
        chunks.push_back(std::move(node));
    }
    GraphState state = add_nodes(GraphState{}, std::move(chunks));

    EmbedderDims dims;  // fixture-scale text embedding width comes from the client
    state = populate_embeddings(state, embedder, dims);

    const std::size_t n = state.node_count();
    const std::size_t k_eff = std::min(k, n > 0 ? n - 1 : 0);
    if (k_eff >= 1) {
        state = knn_implicit_edges(state, Modality::Text, k_eff, threshold);
    }
    return state;
}

GraphState build_bipartite_rec_graph(
    const std::vector<std::pair<std::string, std::string>>& interactions,
    const std::vector<MultiModalNode>& user_payloads,
    const std::vector<MultiModalNode>& item_payloads) {
    std::vector<MultiModalNode> nodes = user_payloads;
    nodes.insert(nodes.end(), item_payloads.begin(), item_payloads.end());
    GraphState state = add_nodes(GraphState{}, std::move(nodes));
    std::vector<Edge> edges;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [user, item] : interactions) {
        if (!state.has_node(user) || !state.has_node(item)) {
            raise(Errc::DanglingInteraction, "interaction (" + user + "," + item +
                                                 ") references an unknown node");
        }
        const auto key = std::minmax(user, item);
        if (!seen.insert(key).second) continue;  // duplicates deduplicate silently
        edges.push_back(Edge{user, item, EdgeKind::Explicit, 1.0, "interaction"});
    }
    if (!edges.empty()) state = add_edges(state, std::move(edges));
    return state;
}

PlantedRagDocument make_planted_rag_document(const RagFixtureSpec& spec) {
    if (spec.chunks == 0 || spec.words_per_chunk == 0) {
        raise(Errc::InvalidConfigValue, "rag fixture needs chunks and words_per_chunk >= 1");
    }
    SplitMix rng(splitmix64(spec.seed) ^ 0x7261676669786bull);

    // answer words first, padded with filler to exactly words_per_chunk
    std::vector<std::string> answer_words;
    {
        std::istringstream is(spec.answer);
        std::string w;
        while (is >> w) answer_words.push_back(w);
    }
    if (answer_words.size() > spec.words_per_chunk) {
        raise(Errc::InvalidConfigValue, "answer longer than one chunk");
    }
    while (answer_words.size() < spec.words_per_chunk) {
        answer_words.push_back("pad" + std::to_string(rng.next_below(1000)));
    }

    const std::size_t answer_index = rng.next_below(spec.chunks);
    std::vector<std::string> chunks;
    for (std::size_t c = 0; c < spec.chunks; ++c) {
        if (c == answer_index) {
            chunks.push_back(join(answer_words, " "));
            continue;
        }
        std::vector<std::string> ws;
        for (std::size_t w = 0; w < spec.words_per_chunk; ++w) {
            ws.push_back("w" + std::to_string(rng.next_below(100000)));
        }
        chunks.push_back(join(ws, " "));
    }

    PlantedRagDocument out;
    out.document = join(chunks, " ");
    out.answer_chunk_text = chunks[answer_index];
    out.answer_chunk_index = answer_index;
    return out;
}

TaskFixture build_task_fixture(const TaskSpec& spec, DecoderClient& embedder) {
    TaskFixture fx;
    switch (spec.task) {
        case TaskKind::Rag: {
            const PlantedRagDocument doc = make_planted_rag_document(spec.rag);
            fx.state = build_rag_graph(doc.document, spec.rag.words_per_chunk, embedder,
                                       spec.rag.k, spec.rag.threshold);
            fx.action.id = "rag-query";
            fx.action.kind = UnintendedAction{doc.answer_chunk_text, spec.rag.k};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::Recommendation: {
            std::vector<MultiModalNode> users, items;
            for (std::size_t u = 0; u < spec.rec.users; ++u) {
                MultiModalNode n;
                n.id = "user-" + pad4(u);
                n.text = "User " + pad4(u) + " reviews outdoor gear and picture books.";
                users.push_back(std::move(n));
            }
            for (std::size_t i = 0; i < spec.rec.items; ++i) {
                MultiModalNode n;
                n.id = "item-" + pad4(i);
                TablePayload t;
                t.columns = {"category", "price"};
                t.values = {"gear", std::to_string(5 + i)};
                n.table = std::move(t);
                n.text = "Item " + pad4(i) + " durable and light.";
                items.push_back(std::move(n));
            }
            if (spec.rec.users < 1 || spec.rec.items < 2) {
                raise(Errc::InvalidConfigValue, "rec fixture needs >=1 user and >=2 items");
            }
            // the target pair (user-0000, item-0001) stays unconnected; the
            // planted answer rides the target item's text
            *items[1].text += " ANSWER:" + spec.rec.planted_answer;
            std::vector<std::pair<std::string, std::string>> interactions;
            for (std::size_t u = 0; u < spec.rec.users; ++u) {
                for (std::size_t i = 0; i < spec.rec.items; ++i) {
                    if (u == 0 && i == 1) continue;
                    interactions.push_back({"user-" + pad4(u), "item-" + pad4(i)});
                }
            }
            fx.state = build_bipartite_rec_graph(interactions, users, items);
            fx.action.id = "rec-predict";
            fx.action.kind = IntendedAction{ActionLevel::Edge, {"user-0000", "item-0001"}, false};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::NodePrediction: {
            GraphState state;
            MultiModalNode center;
            center.id = "paper-0000";
            center.text = "Learning under persistent drift with weighted error estimates. "
                          "ANSWER:" + spec.generic.planted_answer;
            state = add_node(state, center);
            for (std::size_t i = 1; i <= 2; ++i) {
                MultiModalNode n;
                n.id = "paper-" + pad4(i);
                n.text = "Cited work " + pad4(i) + " on hypothesis bounds.";
                state = add_node(state, n);
                state = add_edge(state, Edge{"paper-0000", n.id, EdgeKind::Explicit});
            }
            fx.state = std::move(state);
            fx.action.id = "classify-node";
            fx.action.kind = IntendedAction{ActionLevel::Node, {"paper-0000"}, false};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::EdgePrediction: {
            GraphState state;
            for (std::size_t i = 0; i < 3; ++i) {
                MultiModalNode n;
                n.id = "paper-" + pad4(i);
                n.text = "Paper " + pad4(i) + " on graph models.";
                if (i == 0) *n.text += " ANSWER:" + spec.generic.planted_answer;
                state = add_node(state, n);
            }
            state = add_edge(state, Edge{"paper-0000", "paper-0001", EdgeKind::Explicit});
            state = add_edge(state, Edge{"paper-0001", "paper-0002", EdgeKind::Explicit});
            fx.state = std::move(state);
            fx.action.id = "predict-link";
            fx.action.kind = IntendedAction{ActionLevel::Edge, {"paper-0000", "paper-0002"}, false};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::GraphPrediction: {
            GraphState state;
            for (std::size_t i = 0; i < 4; ++i) {
                MultiModalNode n;
                n.id = "atom-" + pad4(i);
                n.text = (i % 2 == 0 ? "carbon atom" : "nitrogen atom");
                state = add_node(state, n);
            }
            state = add_edge(state, Edge{"atom-0000", "atom-0001", EdgeKind::Explicit});
            state = add_edge(state, Edge{"atom-0001", "atom-0002", EdgeKind::Explicit});
            state = add_edge(state, Edge{"atom-0002", "atom-0003", EdgeKind::Explicit});
            fx.state = std::move(state);
            fx.action.id = "classify-graph";
            fx.action.kind = IntendedAction{ActionLevel::Graph, {}, true};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::Planning: {
            GraphState state;
            const char* steps[] = {"go to shelf 1", "take vase 2", "go to table 1"};
            for (std::size_t i = 0; i < 3; ++i) {
                MultiModalNode n;
                n.id = "decision-" + pad4(i);
                n.text = steps[i];
                n.image_ref = "frame-" + pad4(i);
                state = add_node(state, n);
                if (i > 0) {
                    state = add_edge(state, Edge{"decision-" + pad4(i - 1), n.id,
                                                 EdgeKind::Implicit, 0.9, std::nullopt});
                }
            }
            fx.state = std::move(state);
            fx.action.id = "plan-next";
            fx.action.kind = IntendedAction{ActionLevel::Graph, {}, true};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::MultiModalGeneration: {
            GraphState state;
            MultiModalNode n;
            n.id = "entity-0000";
            n.text = "A red bicycle leaning on a white wall.";
            state = add_node(state, n);
            MultiModalNode m;
            m.id = "entity-0001";
            m.text = "A blue bicycle in a garage.";
            state = add_node(state, m);
            state = add_edge(state, Edge{"entity-0000", "entity-0001", EdgeKind::Implicit, 0.8});
            fx.state = std::move(state);
            fx.action.id = "generate-image";
            fx.action.kind = IntendedAction{ActionLevel::Node, {"entity-0000"}, false};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::MultiModalMatching: {
            GraphState state;
            MultiModalNode a;
            a.id = "modal-0000";
            a.text = "Illustration of a binary tree. ANSWER:" + spec.generic.planted_answer;
            state = add_node(state, a);
            MultiModalNode b;
            b.id = "modal-0001";
            b.image_ref = "fig-0001";
            state = add_node(state, b);
            fx.state = std::move(state);
            fx.action.id = "match-pair";
            fx.action.kind = IntendedAction{ActionLevel::Edge, {"modal-0000", "modal-0001"}, false};
            fx.action.template_id = spec.template_id;
            break;
        }
        case TaskKind::MultiAgent: {
            GraphState state;
            MultiModalNode patient;
            patient.id = "agent-patient";
            patient.text = "Patient reports fever and joint pain for three days.";
            state = add_node(state, patient);
            MultiModalNode measurement;
            measurement.id = "agent-measurement";
            measurement.text = "Measurement agent: temperature 38.9 C, pulse 92.";
            measurement.image_ref = "scan-0001";
            state = add_node(state, measurement);
            MultiModalNode moderator;
            moderator.id = "agent-moderator";
            moderator.text = "Moderator collates test results and questions.";
            state = add_node(state, moderator);
            MultiModalNode knowledge;
            knowledge.id = "knowledge-0000";
            knowledge.text = "Reference: differential diagnosis for febrile arthralgia.";
            state = add_node(state, knowledge);
            state = add_edge(state, Edge{"agent-patient", "agent-moderator", EdgeKind::Explicit});
            state = add_edge(state, Edge{"agent-measurement", "agent-moderator", EdgeKind::Explicit});
            state = add_edge(state, Edge{"agent-moderator", "knowledge-0000", EdgeKind::Explicit});
            fx.state = std::move(state);
            fx.action.id = "agent-answer";
            fx.action.kind = IntendedAction{
                ActionLevel::Graph, {"agent-patient", "agent-measurement", "agent-moderator"},
                false};
            fx.action.template_id = spec.template_id;
            fx.action.params["user_query"] = "What is the most likely diagnosis?";
            break;
        }
    }
    (void)embedder;
    return fx;
}

// ---- answer parsing -------------------------------------------------------------

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// first whitespace token with surrounding punctuation stripped
std::string first_token(const std::string& text) {
    std::size_t begin = 0;
    while (begin < text.size() && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    std::size_t end = begin;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    while (begin < end && !std::isalnum(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && !std::isalnum(static_cast<unsigned char>(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

} // namespace

StepOutcome parse_decoder_answer(const TaskSpec& spec, const DecoderResponse& response,
                                 const std::vector<StateNodeRef>& targets) {
    if (spec.parser_id == "image-node") {
        if (response.image_ref.empty()) {
            raise(Errc::UnparseableResponse, "image task got no image_ref");
        }
        if (targets.empty()) {
            raise(Errc::UnresolvedRef, "image task needs a target node");
        }
        Transition t;
        t.kind = Transition::Kind::UpdateNodes;
        NodePatch patch;
        patch.node_id = targets[0].node_id;
        patch.image_ref = response.image_ref;
        t.patches.push_back(std::move(patch));
        return t;
    }
    if (spec.parser_id == "edge-yes-no") {
        if (targets.size() < 2) {
            raise(Errc::UnresolvedRef, "edge task needs two targets");
        }
        const std::string token = lowercase(first_token(response.text));
        if (token == "yes") {
            Transition t;
            t.kind = Transition::Kind::UpdateEdges;
            Edge e{targets[0].node_id, targets[1].node_id, EdgeKind::Explicit, 1.0, std::nullopt};
            if (spec.task == TaskKind::Recommendation) e.edge_type = "interaction";
            t.add_edges.push_back(std::move(e));
            return t;
        }
        if (token == "no") {
            PredictionRecord rec;
            rec.task = task_kind_name(spec.task);
            for (const auto& t : targets) rec.target_ids.push_back(t.node_id);
            rec.label = "no";
            rec.text = response.text;
            rec.response_id = response.request_id;
            return rec;
        }
        raise(Errc::UnparseableResponse,
              "edge task expects yes/no, got '" + response.text.substr(0, 40) + "'");
    }
    if (spec.parser_id == "label-match") {
        const std::string haystack = lowercase(response.text);
        std::string best;
        for (const auto& label : spec.labels) {
            if (label.size() <= best.size()) continue;
            if (haystack.find(lowercase(label)) != std::string::npos) best = label;
        }
        if (best.empty()) {
            raise(Errc::UnparseableResponse,
                  "no label matches '" + response.text.substr(0, 40) + "'");
        }
        PredictionRecord rec;
        rec.task = task_kind_name(spec.task);
        for (const auto& t : targets) rec.target_ids.push_back(t.node_id);
        rec.label = best;
        rec.text = response.text;
        rec.response_id = response.request_id;
        return rec;
    }
    if (spec.parser_id == "free-text") {
        PredictionRecord rec;
        rec.task = task_kind_name(spec.task);
        for (const auto& t : targets) rec.target_ids.push_back(t.node_id);
        rec.text = response.text;
        rec.response_id = response.request_id;
        return rec;
    }
    raise(Errc::SchemaViolation, "unknown parser '" + spec.parser_id + "'");
}

namespace {

class SpecAdapter : public TaskAdapter {
public:
    explicit SpecAdapter(TaskSpec spec) : spec_(std::move(spec)) {}

    std::string task_name() const override { return task_kind_name(spec_.task); }

    bool wants_image_decoder() const override { return spec_.parser_id == "image-node"; }

    std::map<std::string, std::string> prompt_slots(
        const GraphState&, const ActionNode& action, const std::vector<StateNodeRef>&,
        const std::vector<std::string>& target_texts) const override {
        std::map<std::string, std::string> slots;
        auto text_at = [&](std::size_t i) -> const std::string& {
            static const std::string empty;
            return i < target_texts.size() ? target_texts[i] : empty;
        };
        switch (spec_.task) {
            case TaskKind::Rag:
                slots["user_query"] = action.unintended().query_text;
                slots["retrieved_documents"] = join(target_texts, "\n");
                break;
            case TaskKind::Recommendation:
                slots["user_node"] = text_at(0);
                slots["item_node"] = text_at(1);
                break;
            case TaskKind::NodePrediction:
                slots["node"] = text_at(0);
                break;
            case TaskKind::EdgePrediction:
                slots["node_1"] = text_at(0);
                slots["node_2"] = text_at(1);
                break;
            case TaskKind::GraphPrediction:
                slots["molecule"] = join(target_texts, "; ");
                break;
            case TaskKind::Planning:
                slots["historical_information"] = join(target_texts, "; ");
                break;
            case TaskKind::MultiModalGeneration:
                slots["modality"] = text_at(0);
                break;
            case TaskKind::MultiModalMatching:
                slots["modality_1"] = text_at(0);
                slots["modality_2"] = text_at(1);
                break;
            case TaskKind::MultiAgent:
                slots["patient_agent_context"] = text_at(0);
                slots["measurement_agent_context"] = text_at(1);
                slots["moderator_agent_context"] = text_at(2);
                break;
        }
        return slots;
    }

    StepOutcome parse(const GraphState&, const ActionNode&,
                      const std::vector<StateNodeRef>& targets,
                      const DecoderResponse& response) const override {
        return parse_decoder_answer(spec_, response, targets);
    }

private:
    TaskSpec spec_;
};

} // namespace

std::unique_ptr<TaskAdapter> make_adapter(const TaskSpec& spec) {
    return std::make_unique<SpecAdapter>(spec);
}

// ---- hop ablation harness ---------------------------------------------------------

SyntheticFixture build_synthetic_fixture(const SyntheticGraphSpec& spec) {
    if (spec.nodes < 4) {
        raise(Errc::DegenerateFixture, "synthetic fixture needs at least 4 nodes");
    }
    if (spec.label_rule != "neighbor_majority" && spec.label_rule != "own_sign") {
        raise(Errc::InvalidConfigValue, "label_rule must be neighbor_majority or own_sign");
    }
    SplitMix rng(splitmix64(spec.seed) ^ 0x73796e7468ull);  // "synth"
    const std::size_t n = spec.nodes;

    std::vector<int> latent(n);
    for (auto& s : latent) s = (rng.next_u64() & 1) ? 1 : -1;

    std::vector<MultiModalNode> nodes;
    for (std::size_t i = 0; i < n; ++i) {
        MultiModalNode node;
        node.id = "v" + pad4(i);
        node.text = "synthetic node " + pad4(i);
        nodes.push_back(std::move(node));
    }
    GraphState state = add_nodes(GraphState{}, std::move(nodes));
    if (spec.with_edges) {
        const double p = spec.avg_degree / static_cast<double>(n - 1);
        std::vector<Edge> edges;
        std::vector<std::size_t> degree(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (rng.next_unit() < p) {
                    edges.push_back(Edge{"v" + pad4(i), "v" + pad4(j), EdgeKind::Explicit});
                    ++degree[i];
                    ++degree[j];
                }
            }
        }
        // no isolated nodes: neighbor-majority labels need neighbors
        for (std::size_t i = 0; i < n; ++i) {
            if (degree[i] == 0) {
                edges.push_back(Edge{"v" + pad4(i), "v" + pad4((i + 1) % n), EdgeKind::Explicit});
                ++degree[i];
                ++degree[(i + 1) % n];
            }
        }
        state = add_edges(state, std::move(edges));
    }

    const std::size_t d = spec.feature_dim;
    EmbeddingMatrix features;
    features.x = Matrix(n, d);
    features.node_order = state.node_order();
    features.source_version = state.version();
    const double dir = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            features.x.at(i, c) =
                spec.signal * latent[i] * dir + spec.noise * rng.next_signed_unit();
        }
    }

    std::vector<int> labels(n, 1);
    if (spec.label_rule == "own_sign") {
        labels = latent;
    } else {
        std::map<std::string, std::size_t> pos;
        const auto order = state.node_order();
        for (std::size_t i = 0; i < n; ++i) pos[order[i]] = i;
        for (std::size_t i = 0; i < n; ++i) {
            int sum = 0;
            for (const auto& u : state.neighbor_ids(order[i])) sum += latent[pos[u]];
            labels[i] = sum >= 0 ? 1 : -1;
        }
    }

    SyntheticFixture fx;
    fx.state = std::move(state);
    fx.features = std::move(features);
    fx.labels = std::move(labels);
    return fx;
}

namespace {

// solve (G) w = b for symmetric positive definite G, in place
std::vector<double> cholesky_solve(Matrix g, std::vector<double> b) {
    const std::size_t p = g.rows;
    for (std::size_t j = 0; j < p; ++j) {
        double d = g.at(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= g.at(j, k) * g.at(j, k);
        if (d <= 0.0) {
            raise(Errc::DegenerateFixture, "probe normal equations are not positive definite");
        }
        d = std::sqrt(d);
        g.at(j, j) = d;
        for (std::size_t i = j + 1; i < p; ++i) {
            double v = g.at(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= g.at(i, k) * g.at(j, k);
            g.at(i, j) = v / d;
        }
    }
    for (std::size_t i = 0; i < p; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= g.at(i, k) * b[k];
        b[i] = v / g.at(i, i);
    }
    for (std::size_t i = p; i-- > 0;) {
        double v = b[i];
        for (std::size_t k = i + 1; k < p; ++k) v -= g.at(k, i) * b[k];
        b[i] = v / g.at(i, i);
    }
    return b;
}

} // namespace

double linear_probe_accuracy(const HopStack& stack, std::size_t use_hops,
                             const std::vector<int>& labels, const ProbeConfig& probe,
                             std::uint64_t split_seed) {
    if (use_hops > stack.hop_count) {
        raise(Errc::ShapeMismatch, "probe asked for more hops than the stack holds");
    }
    const std::size_t n = stack.hops[0].rows;
    const std::size_t d = stack.hops[0].cols;
    if (labels.size() != n) {
        raise(Errc::ShapeMismatch, "label count disagrees with the stack");
    }

    // concatenated hop features [X | X^(1) | ... | X^(use_hops)]
    const std::size_t p = d * (use_hops + 1);
    Matrix phi(n, p);
    for (std::size_t l = 0; l <= use_hops; ++l) {
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                phi.at(r, l * d + c) = stack.hops[l].at(r, c);
            }
        }
    }

    // seeded shuffle split
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    SplitMix rng(splitmix64(split_seed) ^ 0x73706c6974ull);  // "split"
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = rng.next_below(i + 1);
        std::swap(idx[i], idx[j]);
    }
    std::size_t train_n = static_cast<std::size_t>(
        std::llround(probe.train_fraction * static_cast<double>(n)));
    train_n = std::clamp<std::size_t>(train_n, 1, n - 1);

    bool pos = false, neg = false;
    for (std::size_t i = 0; i < train_n; ++i) {
        (labels[idx[i]] > 0 ? pos : neg) = true;
    }
    if (!pos || !neg) {
        raise(Errc::DegenerateFixture, "training split holds a single class");
    }

    // ridge normal equations on the training rows
    Matrix gram(p, p);
    std::vector<double> rhs(p, 0.0);
    for (std::size_t t = 0; t < train_n; ++t) {
        const std::size_t r = idx[t];
        const double y = static_cast<double>(labels[r]);
        for (std::size_t a = 0; a < p; ++a) {
            const double xa = phi.at(r, a);
            rhs[a] += xa * y;
            for (std::size_t b = a; b < p; ++b) {
                gram.at(a, b) += xa * phi.at(r, b);
            }
        }
    }
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < a; ++b) gram.at(a, b) = gram.at(b, a);
        gram.at(a, a) += probe.ridge_lambda;
    }
    const std::vector<double> w = cholesky_solve(std::move(gram), std::move(rhs));

    std::size_t correct = 0;
    for (std::size_t t = train_n; t < n; ++t) {
        const std::size_t r = idx[t];
        double score = 0.0;
        for (std::size_t a = 0; a < p; ++a) score += phi.at(r, a) * w[a];
        const int predicted = score >= 0.0 ? 1 : -1;
        if (predicted == labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n - train_n);
}

AblationReport hop_ablation(const SyntheticGraphSpec& fixture,
                            const std::vector<std::size_t>& hop_values, const ProbeConfig& probe,
                            std::uint64_t seed) {
    if (hop_values.empty()) {
        raise(Errc::InvalidConfigValue, "hop ablation needs at least one hop value");
    }
    SyntheticGraphSpec spec = fixture;
    spec.seed = fixture.seed + seed;  // each harness seed draws a fresh fixture
    const SyntheticFixture fx = build_synthetic_fixture(spec);

    bool pos = false, neg = false;
    for (int l : fx.labels) (l > 0 ? pos : neg) = true;
    if (!pos || !neg) {
        raise(Errc::DegenerateFixture, "fixture labels collapse to one class");
    }

    const std::size_t max_hops = *std::max_element(hop_values.begin(), hop_values.end());
    HopStack stack;
    if (max_hops == 0) {
        stack.hops = {fx.features.x};
        stack.hop_count = 0;
        stack.node_order = fx.features.node_order;
        stack.source_version = fx.features.source_version;
    } else {
        stack = propagate(fx.features, normalize_adjacency(adjacency(fx.state)), max_hops);
    }

    const std::uint64_t split_seed = splitmix64(seed) ^ 0x61626c617465ull;  // "ablate"
    const std::size_t splits = probe.splits == 0 ? 1 : probe.splits;
    AblationReport report;
    for (std::size_t l : hop_values) {
        double acc = 0.0;
        for (std::size_t s = 0; s < splits; ++s) {
            acc += linear_probe_accuracy(stack, l, fx.labels, probe, split_seed + s);
        }
        AblationRow row;
        row.task = std::string("synthetic-") + fixture.label_rule;
        row.hops = l;
        row.metric = "accuracy";
        row.value = acc / static_cast<double>(splits);
        row.seed = seed;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string ablation_csv(const AblationReport& report) {
    std::ostringstream os;
    os << "task,L,metric,value,seed\n";
    for (const auto& row : report.rows) {
        os << row.task << "," << row.hops << "," << row.metric << ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", row.value);
        os << buf << "," << row.seed << "\n";
    }
    return os.str();
}

SyntheticGraphSpec load_synthetic_spec(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    json doc = json::parse(is, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(Errc::SchemaViolation, "'" + path + "' is not a synthetic fixture file");
    }
    SyntheticGraphSpec spec;
    if (doc.contains("nodes")) spec.nodes = doc["nodes"].get<std::size_t>();
    if (doc.contains("avg_degree")) spec.avg_degree = doc["avg_degree"].get<double>();
    if (doc.contains("feature_dim")) spec.feature_dim = doc["feature_dim"].get<std::size_t>();
    if (doc.contains("signal")) spec.signal = doc["signal"].get<double>();
    if (doc.contains("noise")) spec.noise = doc["noise"].get<double>();
    if (doc.contains("label_rule")) spec.label_rule = doc["label_rule"].get<std::string>();
    if (doc.contains("with_edges")) spec.with_edges = doc["with_edges"].get<bool>();
    if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
    return spec;
}

void save_synthetic_spec(const SyntheticGraphSpec& spec, const std::string& path) {
    ordered_json doc;
    doc["nodes"] = spec.nodes;
    doc["avg_degree"] = spec.avg_degree;
    doc["feature_dim"] = spec.feature_dim;
    doc["signal"] = spec.signal;
    doc["noise"] = spec.noise;
    doc["label_rule"] = spec.label_rule;
    doc["with_edges"] = spec.with_edges;
    doc["seed"] = spec.seed;
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for writing");
    }
    os << doc.dump(2) << "\n";
}

GraphState triangle_with_pendant_path(std::size_t path_len) {
    GraphState state;
    for (const char* id : {"tri-a", "tri-b", "tri-c"}) {
        MultiModalNode n;
        n.id = id;
        n.text = std::string("triangle vertex ") + id;
        state = add_node(state, n);
    }
    state = add_edge(state, Edge{"tri-a", "tri-b", EdgeKind::Explicit});
    state = add_edge(state, Edge{"tri-b", "tri-c", EdgeKind::Explicit});
    state = add_edge(state, Edge{"tri-a", "tri-c", EdgeKind::Explicit});
    std::string prev = "tri-c";
    for (std::size_t i = 0; i < path_len; ++i) {
        MultiModalNode n;
        n.id = "path-" + pad4(i);
        n.text = "pendant vertex " + pad4(i);
        state = add_node(state, n);
        state = add_edge(state, Edge{prev, n.id, EdgeKind::Explicit});
        prev = n.id;
    }
    return state;
}

} // namespace gwm
