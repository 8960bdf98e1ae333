#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "gwm/decoder_client.hpp"
#include "gwm/graph.hpp"

namespace gwm {

enum class TokenizerKind { Whitespace, CharsOver4, External };

// Token accounting for emitted prompts. Whitespace is the default: counts
// maximal non-space runs, deterministic and dependency-free. External plugs a
// service-provided counter for deployments where the real tokenizer matters.
struct TokenBudget {
    std::size_t max_tokens = 2048;
    TokenizerKind tokenizer = TokenizerKind::Whitespace;
    std::function<std::size_t(std::string_view)> external;
};

std::size_t count_tokens(const TokenBudget& budget, std::string_view text);

// "{col_1} is {val_1}, {col_2} is {val_2}, ..." — no trailing separator.
std::string table_to_text(const TablePayload& table);

// One node unified into plain text. hop_texts[0] == unified.
struct UnifiedTextNode {
    std::string node_id;
    std::string unified;                    // v_c
    std::map<int, std::string> hop_texts;   // level -> aggregated text
};

// Renders the unify template over the node's modalities: images go through
// the captioner, tables through table_to_text, absent modalities render as
// the literal "N/A".
UnifiedTextNode unify_node_text(const MultiModalNode& node, DecoderClient& captioner);

// Assembled text of the center node after `hops` levels of neighbor-text
// aggregation. Neighbors are listed in ascending id order; when the result
// would exceed the budget, whole neighbor entries are dropped farthest hop
// first (never mid-string truncation). Deterministic.
std::string token_message_pass(const GraphState& state,
                               const std::map<std::string, UnifiedTextNode>& unified,
                               const std::string& center, std::size_t hops,
                               const TokenBudget& budget);

// Template literals used by the token pipeline.
std::string_view unify_template();
std::string_view aggregate_template();

} // namespace gwm
