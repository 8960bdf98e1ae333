#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gwm/graph.hpp"

namespace gwm {

enum class ActionLevel { Node, Edge, Graph };

const char* action_level_name(ActionLevel level) noexcept;

// Targets declared up front at node/edge/graph granularity.
struct IntendedAction {
    ActionLevel level = ActionLevel::Node;
    std::vector<std::string> targets;  // node ids; empty + all_nodes for whole graph
    bool all_nodes = false;
};

// Targets found by similarity between the query and node embeddings.
struct UnintendedAction {
    std::string query_text;
    std::size_t k = 5;
};

// A task query against the world state.
struct ActionNode {
    std::string id;
    std::variant<IntendedAction, UnintendedAction> kind;
    std::string template_id;
    std::map<std::string, std::string> params;  // extra template slot values

    bool is_intended() const { return std::holds_alternative<IntendedAction>(kind); }
    const IntendedAction& intended() const { return std::get<IntendedAction>(kind); }
    const UnintendedAction& unintended() const { return std::get<UnintendedAction>(kind); }
};

struct PromptTemplate {
    std::string id;
    std::string body;                 // named {slot}s
    std::vector<std::string> slots;   // required
};

// Action-prompt registry. Ships with the built-in task templates and loads
// custom ones from templates.gwm.json.
class TemplateRegistry {
public:
    static TemplateRegistry builtin();
    static TemplateRegistry load_file(const std::string& path);
    void save_file(const std::string& path) const;

    void add(PromptTemplate tmpl);
    bool has(const std::string& id) const;
    const PromptTemplate& get(const std::string& id) const;
    const std::vector<PromptTemplate>& all() const { return templates_; }

private:
    std::vector<PromptTemplate> templates_;
    std::map<std::string, std::size_t> index_;
};

// Substitutes every required slot; any missing value raises MissingSlot.
std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& slot_values);

std::string render_action_prompt(const ActionNode& action,
                                 const std::map<std::string, std::string>& target_texts,
                                 const TemplateRegistry& registry);

struct ResolveOptions {
    bool text_only = false;   // restrict similarity to the text slot
    std::size_t expand_hops = 0;  // optionally grow the target set along edges
};

// v_r = R(v, a): intended actions return their declared targets verbatim;
// unintended actions rank nodes by cosine similarity to the query embedding,
// ties broken by node id ascending.
std::vector<StateNodeRef> resolve_targets(const GraphState& state, const ActionNode& action,
                                          const std::optional<std::vector<double>>& query_embedding,
                                          const ResolveOptions& opts = {});

} // namespace gwm
