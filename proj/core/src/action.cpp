#include "gwm/action.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "gwm/edge_builder.hpp"

#include "json.hpp"

namespace gwm {

const char* action_level_name(ActionLevel level) noexcept {
    switch (level) {
        case ActionLevel::Node: return "node";
        case ActionLevel::Edge: return "edge";
        case ActionLevel::Graph: return "graph";
    }
    return "?";
}

TemplateRegistry TemplateRegistry::builtin() {
    TemplateRegistry reg;
    reg.add({"multimodal-generation",
             "This is a multi-modal generation task. Please predict the missing modality based on "
             "the given modality: {modality}.",
             {"modality"}});
    reg.add({"multimodal-matching",
             "This task involves matching multi-modal information. Given two modalities: "
             "{modality_1} and {modality_2}, please determine whether they correspond with each "
             "other.",
             {"modality_1", "modality_2"}});
    reg.add({"recommendation",
             "This is a recommendation task. Given the user node and item node: {user_node} and "
             "{item_node}, please tell me whether these two nodes should connect to each other.",
             {"user_node", "item_node"}});
    reg.add({"node-classification-papers",
             "Given a node-centered graph: {node}, each node represents a paper, we need to "
             "classify the center node into 7 classes: Case Based, Genetic Algorithms, Neural "
             "Networks, Probabilistic Methods, Reinforcement Learning, Rule Learning, Theory, "
             "please tell me which class the center node belongs to?",
             {"node"}});
    reg.add({"node-classification-diabetes",
             "Given a node-centered graph: {node}, each node represents a paper about Diabetes, "
             "we need to classify the center node into 3 classes: Diabetes Mellitus Experimental, "
             "Diabetes Mellitus Type 1, and Diabetes Mellitus Type 2, please tell me which class "
             "the center node belongs to?",
             {"node"}});
    reg.add({"link-prediction",
             "Given two nodes information: {node_1} and {node_2}, please tell me whether two "
             "center nodes in the subgraphs should connect to each other.",
             {"node_1", "node_2"}});
    reg.add({"graph-classification-assay",
             "Human immunodeficiency viruses (HIV) are a type of retrovirus, which induces "
             "acquired immune deficiency syndrome (AIDs). Please determine whether this molecule "
             "{molecule} is effective for this assay.",
             {"molecule"}});
    reg.add({"multi-agent",
             "This is a Multi-Agent Collaborative Generation task for creating dynamic "
             "conversational interactions. Given a user query: {user_query} and context of three "
             "distinct agents: {patient_agent_context}, {measurement_agent_context}, and "
             "{moderator_agent_context}, Please generate a well-rounded response to the user's "
             "question.",
             {"user_query", "patient_agent_context", "measurement_agent_context",
              "moderator_agent_context"}});
    reg.add({"rag",
             "This is a Retrieval-Augmented Generation task for improving response quality in "
             "dialogue systems. Given a user query: {user_query} and a set of retrieved "
             "documents: {retrieved_documents}, the goal is to generate a coherent and "
             "contextually relevant response. Please generate a response that integrates "
             "information from the retrieved documents to accurately address the user's query.",
             {"user_query", "retrieved_documents"}});
    reg.add({"planning",
             "This is an embodied household task, please predict the next decision-making "
             "behavior based on multimodal historical information: {historical_information}.",
             {"historical_information"}});
    return reg;
}

void TemplateRegistry::add(PromptTemplate tmpl) {
    auto it = index_.find(tmpl.id);
    if (it != index_.end()) {
        templates_[it->second] = std::move(tmpl);
        return;
    }
    index_[tmpl.id] = templates_.size();
    templates_.push_back(std::move(tmpl));
}

bool TemplateRegistry::has(const std::string& id) const { return index_.count(id) > 0; }

const PromptTemplate& TemplateRegistry::get(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        raise(Errc::UnknownTemplate, "no template '" + id + "'");
    }
    return templates_[it->second];
}

TemplateRegistry TemplateRegistry::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("templates") ||
        !doc["templates"].is_array()) {
        raise(Errc::SchemaViolation, "'" + path + "' is not a template registry file");
    }
    TemplateRegistry reg;
    for (const auto& t : doc["templates"]) {
        if (!t.is_object() || !t.contains("id") || !t.contains("body") || !t.contains("slots") ||
            !t["id"].is_string() || !t["body"].is_string() || !t["slots"].is_array()) {
            raise(Errc::SchemaViolation, "template entry needs {id, body, slots}");
        }
        PromptTemplate tmpl;
        tmpl.id = t["id"].get<std::string>();
        tmpl.body = t["body"].get<std::string>();
        for (const auto& s : t["slots"]) {
            if (!s.is_string()) {
                raise(Errc::SchemaViolation, "template slot names must be strings");
            }
            tmpl.slots.push_back(s.get<std::string>());
        }
        reg.add(std::move(tmpl));
    }
    return reg;
}

void TemplateRegistry::save_file(const std::string& path) const {
    nlohmann::ordered_json doc;
    doc["templates"] = nlohmann::ordered_json::array();
    for (const auto& t : templates_) {
        nlohmann::ordered_json entry;
        entry["id"] = t.id;
        entry["body"] = t.body;
        entry["slots"] = t.slots;
        doc["templates"].push_back(std::move(entry));
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for writing");
    }
    os << doc.dump(2) << "\n";
}

std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& slot_values) {
    for (const auto& slot : tmpl.slots) {
        if (slot_values.count(slot) == 0) {
            raise(Errc::MissingSlot, "template '" + tmpl.id + "' needs slot '" + slot + "'");
        }
    }
    std::string out = tmpl.body;
    for (const auto& [name, value] : slot_values) {
        const std::string marker = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string render_action_prompt(const ActionNode& action,
                                 const std::map<std::string, std::string>& target_texts,
                                 const TemplateRegistry& registry) {
    const PromptTemplate& tmpl = registry.get(action.template_id);
    std::map<std::string, std::string> values = target_texts;
    for (const auto& [k, v] : action.params) {
        values.emplace(k, v);  // target texts win on collisions
    }
    return render_template(tmpl, values);
}

namespace {

std::vector<double> similarity_vector(const MultiModalNode& node, bool text_only,
                                      const ConcatLayout& layout) {
    if (text_only) {
        if (!node.emb_text) {
            raise(Errc::MissingEmbedding, "node '" + node.id + "' lacks text embedding");
        }
        return *node.emb_text;
    }
    return concat_embedding(node, layout);
}

} // namespace

std::vector<StateNodeRef> resolve_targets(const GraphState& state, const ActionNode& action,
                                          const std::optional<std::vector<double>>& query_embedding,
                                          const ResolveOptions& opts) {
    if (state.node_count() == 0) {
        raise(Errc::EmptyGraph, "cannot resolve targets against an empty state");
    }

    std::vector<StateNodeRef> targets;
    if (action.is_intended()) {
        const IntendedAction& intended = action.intended();
        if (intended.all_nodes) {
            for (const auto& id : state.node_order()) targets.push_back({id});
        } else {
            switch (intended.level) {
                case ActionLevel::Node:
                    if (intended.targets.size() != 1) {
                        raise(Errc::UnresolvedRef, "node-level action takes exactly one target");
                    }
                    break;
                case ActionLevel::Edge:
                    if (intended.targets.size() != 2) {
                        raise(Errc::UnresolvedRef, "edge-level action takes exactly two targets");
                    }
                    break;
                case ActionLevel::Graph:
                    if (intended.targets.empty()) {
                        raise(Errc::UnresolvedRef, "graph-level action needs targets or all_nodes");
                    }
                    break;
            }
            for (const auto& id : intended.targets) {
                if (!state.has_node(id)) {
                    raise(Errc::UnresolvedRef, "target '" + id + "' not in state");
                }
                targets.push_back({id});
            }
        }
    } else {
        const UnintendedAction& unintended = action.unintended();
        if (!query_embedding) {
            raise(Errc::MissingEmbedding, "unintended action needs a query embedding");
        }
        if (unintended.k == 0) {
            raise(Errc::UnresolvedRef, "unintended action needs k >= 1");
        }
        struct Scored {
            double sim;
            std::string id;
        };
        const ConcatLayout layout = concat_layout(state);
        std::vector<Scored> scored;
        scored.reserve(state.node_count());
        for (const auto& id : state.node_order()) {
            const std::vector<double> v = similarity_vector(state.node(id), opts.text_only, layout);
            scored.push_back({cosine_similarity(*query_embedding, v), id});
        }
        std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
            if (a.sim != b.sim) return a.sim > b.sim;
            return a.id < b.id;
        });
        const std::size_t take = std::min(unintended.k, scored.size());
        for (std::size_t i = 0; i < take; ++i) targets.push_back({scored[i].id});
    }

    if (opts.expand_hops > 0) {
        // frontier growth along edges; appended in (hop, id) order
        std::set<std::string> seen;
        for (const auto& t : targets) seen.insert(t.node_id);
        std::vector<std::string> frontier;
        for (const auto& t : targets) frontier.push_back(t.node_id);
        for (std::size_t hop = 0; hop < opts.expand_hops; ++hop) {
            std::set<std::string> next;
            for (const auto& id : frontier) {
                for (const auto& u : state.neighbor_ids(id)) {
                    if (seen.insert(u).second) next.insert(u);
                }
            }
            frontier.assign(next.begin(), next.end());
            for (const auto& id : frontier) targets.push_back({id});
            if (frontier.empty()) break;
        }
    }
    return targets;
}

} // namespace gwm
