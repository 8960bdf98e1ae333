#include "gwm/token_mp.hpp"

#include <algorithm>

namespace gwm {

namespace {

constexpr std::string_view kUnifyPrefix = "The image's text description is: ";
constexpr std::string_view kUnifyText = ", original text is: ";
constexpr std::string_view kUnifyTable = ", table description is: ";

constexpr std::string_view kAggCenter = "The text description of the central node is: ";
constexpr std::string_view kAggNeighbors =
    ", and the text descriptions of the neighboring nodes are: ";

constexpr std::string_view kAbsent = "N/A";
constexpr std::string_view kNeighborSep = "; ";

} // namespace

std::string_view unify_template() {
    return "The image's text description is: {image_description}, original text is: "
           "{original_text}, table description is: {table_description}.";
}

std::string_view aggregate_template() {
    return "The text description of the central node is: {center_node}, and the text "
           "descriptions of the neighboring nodes are: {neighbor_nodes}.";
}

std::size_t count_tokens(const TokenBudget& budget, std::string_view text) {
    switch (budget.tokenizer) {
        case TokenizerKind::Whitespace: {
            std::size_t count = 0;
            bool in_token = false;
            for (char c : text) {
                const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
                                   c == '\v';
                if (!space && !in_token) ++count;
                in_token = !space;
            }
            return count;
        }
        case TokenizerKind::CharsOver4:
            return (text.size() + 3) / 4;
        case TokenizerKind::External:
            if (!budget.external) {
                raise(Errc::SchemaViolation, "external tokenizer selected but none supplied");
            }
            return budget.external(text);
    }
    return 0;
}

std::string table_to_text(const TablePayload& table) {
    table.validate();
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ", ";
        out += table.columns[i];
        out += " is ";
        out += table.values[i];
    }
    return out;
}

UnifiedTextNode unify_node_text(const MultiModalNode& node, DecoderClient& captioner) {
    if (!node.has_any_modality()) {
        raise(Errc::EmptyNode, "node '" + node.id + "' carries no modality");
    }
    std::string image_desc{kAbsent};
    if (node.image_ref) {
        try {
            image_desc = captioner.caption(*node.image_ref);
        } catch (const Error& e) {
            raise(Errc::CaptionerUnavailable, std::string("caption of '") + node.id +
                                                  "' failed: " + e.what());
        }
    }
    const std::string text_desc = node.text ? *node.text : std::string(kAbsent);
    const std::string table_desc = node.table ? table_to_text(*node.table) : std::string(kAbsent);

    UnifiedTextNode out;
    out.node_id = node.id;
    out.unified.reserve(kUnifyPrefix.size() + image_desc.size() + kUnifyText.size() +
                        text_desc.size() + kUnifyTable.size() + table_desc.size() + 1);
    out.unified.append(kUnifyPrefix).append(image_desc).append(kUnifyText).append(text_desc)
        .append(kUnifyTable).append(table_desc).append(".");
    out.hop_texts[0] = out.unified;
    return out;
}

namespace {

// Expansion tree of the aggregation recursion. Every neighbor slot occurrence
// is a distinct entry so budget eviction can drop exactly one occurrence at a
// time, farthest hop first.
struct TreeNode {
    std::size_t unified_index;   // index into texts
    std::size_t level;           // remaining aggregation depth
    std::size_t hop_dist;        // neighbor links walked from the root
    std::size_t preorder;        // document position
    bool evicted = false;
    std::ptrdiff_t self_child = -1;
    std::vector<std::size_t> neighbor_children;
};

struct Expansion {
    std::vector<TreeNode> arena;
    std::vector<const std::string*> texts;
    std::vector<std::size_t> evictable;  // indices of neighbor entries
};

void render_node(const Expansion& ex, std::size_t idx, std::string& out) {
    const TreeNode& node = ex.arena[idx];
    if (node.level == 0) {
        out += *ex.texts[node.unified_index];
        return;
    }
    out += kAggCenter;
    render_node(ex, static_cast<std::size_t>(node.self_child), out);
    out += kAggNeighbors;
    bool first = true;
    for (std::size_t child : node.neighbor_children) {
        if (ex.arena[child].evicted) continue;
        if (!first) out += kNeighborSep;
        render_node(ex, child, out);
        first = false;
    }
    out += ".";
}

} // namespace

std::string token_message_pass(const GraphState& state,
                               const std::map<std::string, UnifiedTextNode>& unified,
                               const std::string& center, std::size_t hops,
                               const TokenBudget& budget) {
    if (!state.has_node(center)) {
        raise(Errc::CenterMissing, "center node '" + center + "' not in state");
    }

    // texts + id -> index, with ids resolved lazily as the tree reaches them
    Expansion ex;
    std::map<std::string, std::size_t> text_index;
    auto text_of = [&](const std::string& id) -> std::size_t {
        auto it = text_index.find(id);
        if (it != text_index.end()) return it->second;
        auto uit = unified.find(id);
        if (uit == unified.end()) {
            raise(Errc::MissingUnifiedText, "no unified text for node '" + id + "'");
        }
        const std::size_t idx = ex.texts.size();
        ex.texts.push_back(&uit->second.unified);
        text_index.emplace(id, idx);
        return idx;
    };

    if (hops == 0) {
        const std::string& text = *ex.texts[text_of(center)];
        if (count_tokens(budget, text) > budget.max_tokens) {
            raise(Errc::BudgetTooSmallForCenter, "center text alone exceeds the budget");
        }
        return text;
    }

    // Build the expansion tree in document order.
    struct Frame {
        std::string id;
        std::size_t level;
        std::size_t hop_dist;
    };
    std::size_t preorder = 0;
    // neighbor lists are fetched once per id
    std::map<std::string, std::vector<std::string>> neighbor_cache;
    auto neighbors_of = [&](const std::string& id) -> const std::vector<std::string>& {
        auto it = neighbor_cache.find(id);
        if (it != neighbor_cache.end()) return it->second;
        return neighbor_cache.emplace(id, state.neighbor_ids(id)).first->second;
    };

    std::function<std::size_t(const Frame&)> build = [&](const Frame& f) -> std::size_t {
        const std::size_t idx = ex.arena.size();
        ex.arena.push_back(TreeNode{text_of(f.id), f.level, f.hop_dist, preorder++});
        if (f.level == 0) return idx;
        const std::size_t self = build(Frame{f.id, f.level - 1, f.hop_dist});
        ex.arena[idx].self_child = static_cast<std::ptrdiff_t>(self);
        for (const auto& u : neighbors_of(f.id)) {
            const std::size_t child = build(Frame{u, f.level - 1, f.hop_dist + 1});
            ex.arena[idx].neighbor_children.push_back(child);
            ex.evictable.push_back(child);
        }
        return idx;
    };
    build(Frame{center, hops, 0});

    // Eviction sequence: farthest hop first, later document position first.
    std::sort(ex.evictable.begin(), ex.evictable.end(), [&](std::size_t a, std::size_t b) {
        const TreeNode& na = ex.arena[a];
        const TreeNode& nb = ex.arena[b];
        if (na.hop_dist != nb.hop_dist) return na.hop_dist > nb.hop_dist;
        return na.preorder > nb.preorder;
    });

    auto apply_evictions = [&](std::size_t k) {
        for (std::size_t i = 0; i < ex.evictable.size(); ++i) {
            ex.arena[ex.evictable[i]].evicted = i < k;
        }
    };
    auto render_with = [&](std::size_t k) {
        apply_evictions(k);
        std::string out;
        render_node(ex, 0, out);
        return out;
    };
    auto fits = [&](std::size_t k) {
        return count_tokens(budget, render_with(k)) <= budget.max_tokens;
    };

    if (fits(0)) return render_with(0);
    if (!fits(ex.evictable.size())) {
        raise(Errc::BudgetTooSmallForCenter, "center text alone exceeds the budget");
    }
    // smallest eviction count that fits; token count is monotone in k
    std::size_t lo = 0, hi = ex.evictable.size();
    while (lo + 1 < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (fits(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return render_with(hi);
}

} // namespace gwm
