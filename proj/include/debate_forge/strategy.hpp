#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debate_forge/error.hpp"
#include "debate_forge/stance_pattern.hpp"
#include "debate_forge/tree.hpp"

namespace debate_forge {

enum class StrategyName { Supportive, Contradicting, Complex, MultiTurn, Custom };

inline std::string_view to_string(StrategyName n) {
    switch (n) {
        case StrategyName::Supportive: return "supportive";
        case StrategyName::Contradicting: return "contradicting";
        case StrategyName::Complex: return "complex";
        case StrategyName::MultiTurn: return "multi-turn";
        case StrategyName::Custom: return "custom";
    }
    return "?";
}

inline std::optional<StrategyName> parse_strategy_name(std::string_view s) {
    if (s == "supportive") return StrategyName::Supportive;
    if (s == "contradicting" || s == "contradictory") return StrategyName::Contradicting;
    if (s == "complex") return StrategyName::Complex;
    if (s == "multi-turn" || s == "multiturn") return StrategyName::MultiTurn;
    if (s == "custom") return StrategyName::Custom;
    return std::nullopt;
}

struct ParsingStrategy {
    StrategyName name = StrategyName::Custom;
    StancePattern prompt;
    StancePattern response;

    // The four grammars over {Pro, Con}.
    static ParsingStrategy builtin(StrategyName name) {
        constexpr std::string_view single_turn = "[Pro|Con][Pro]*";
        switch (name) {
            case StrategyName::Supportive:
                return {name, compile_stance_pattern(single_turn), compile_stance_pattern("[Pro]+")};
            case StrategyName::Contradicting:
                return {name, compile_stance_pattern(single_turn),
                        compile_stance_pattern("[Con][Pro]*")};
            case StrategyName::Complex:
                return {name, compile_stance_pattern(single_turn),
                        compile_stance_pattern("[Pro|Con][Pro]*")};
            case StrategyName::MultiTurn:
                return {name, compile_stance_pattern("[Pro|Con][Pro]*([Con][Pro]*)*"),
                        compile_stance_pattern("[Con][Pro]*")};
            case StrategyName::Custom:
                break;
        }
        throw Error("custom strategies need explicit patterns");
    }

    static ParsingStrategy custom(std::string_view prompt_src, std::string_view response_src) {
        return {StrategyName::Custom, compile_stance_pattern(prompt_src),
                compile_stance_pattern(response_src)};
    }
};

inline const std::vector<StrategyName>& builtin_strategies() {
    static const std::vector<StrategyName> all{StrategyName::Supportive,
                                               StrategyName::Contradicting,
                                               StrategyName::Complex, StrategyName::MultiTurn};
    return all;
}

// Every split i in [1, len) with seq[0..i) in the prompt language and
// seq[i..) in the response language, ascending.
inline std::vector<std::size_t> find_splits(const ParsingStrategy& strategy,
                                            std::span<const Stance> seq) {
    std::vector<std::size_t> out;
    if (seq.size() < 2) return out;
    int prompt_state = strategy.prompt.start();
    for (std::size_t i = 1; i < seq.size(); ++i) {
        prompt_state = strategy.prompt.step(prompt_state, seq[i - 1]);
        if (prompt_state == kDeadState) break;
        if (strategy.prompt.accepting(prompt_state) && strategy.response.matches(seq.subspan(i))) {
            out.push_back(i);
        }
    }
    return out;
}

struct BlockRange {
    std::size_t begin;
    std::size_t end;
    friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

// One speaker's consecutive arguments: a block opens at index 0 and at every
// later Con.
inline std::vector<BlockRange> turn_blocks(std::span<const Stance> seq) {
    std::vector<BlockRange> out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i == 0 || seq[i] == Stance::Con) {
            if (!out.empty()) out.back().end = i;
            out.push_back({i, seq.size()});
        }
    }
    return out;
}

struct DebatePath {
    std::string tree_id;
    std::vector<std::string> node_ids;
    std::size_t split_index = 0;
    std::vector<std::size_t> turn_starts;

    friend bool operator==(const DebatePath&, const DebatePath&) = default;
};

enum class PathAnchor { AnyNode, RootChildren };

struct PathLimits {
    std::size_t max_len = 20;
    PathAnchor anchor = PathAnchor::AnyNode;
};

inline std::vector<Stance> path_stances(const DebateTree& tree,
                                        std::span<const std::string> node_ids) {
    std::vector<Stance> out;
    out.reserve(node_ids.size());
    for (const auto& id : node_ids) {
        const auto& n = tree.node(id);
        if (!n.stance) throw Error("node '" + id + "' has no stance");
        out.push_back(*n.stance);
    }
    return out;
}

inline std::vector<std::size_t> turn_starts_of(std::span<const Stance> seq) {
    std::vector<std::size_t> out;
    for (const auto& b : turn_blocks(seq)) out.push_back(b.begin);
    return out;
}

// Canonical result order: start node, then length, then split.
inline bool path_order(const DebatePath& a, const DebatePath& b) {
    const auto& as = a.node_ids.front();
    const auto& bs = b.node_ids.front();
    if (as != bs) return natural_less(as, bs);
    if (a.node_ids.size() != b.node_ids.size()) return a.node_ids.size() < b.node_ids.size();
    if (a.split_index != b.split_index) return a.split_index < b.split_index;
    return std::lexicographical_compare(
        a.node_ids.begin(), a.node_ids.end(), b.node_ids.begin(), b.node_ids.end(),
        [](const std::string& x, const std::string& y) { return natural_less(x, y); });
}

namespace detail {

struct SplitCandidate {
    std::size_t split;
    int response_state;
};

class PathWalker {
public:
    PathWalker(const DebateTree& tree, const TreeIndex& index, const ParsingStrategy& strategy,
               std::size_t max_len, std::vector<DebatePath>& out)
        : tree_(tree), index_(index), strategy_(strategy), max_len_(max_len), out_(out) {}

    void walk_from(const std::string& start) {
        ids_.clear();
        stances_.clear();
        descend(start, strategy_.prompt.start(), {});
    }

private:
    // Runs both automata incrementally: the prompt DFA over the prefix, and one
    // response DFA per split point whose prefix the prompt accepted.
    void descend(const std::string& id, int prompt_state, std::vector<SplitCandidate> live) {
        const Stance s = *tree_.node(id).stance;
        const std::size_t pos = ids_.size();

        std::vector<SplitCandidate> next_live;
        next_live.reserve(live.size() + 1);
        for (const auto& c : live) {
            const int st = strategy_.response.step(c.response_state, s);
            if (st != kDeadState) next_live.push_back({c.split, st});
        }
        if (pos >= 1 && strategy_.prompt.accepting(prompt_state)) {
            const int st = strategy_.response.step(strategy_.response.start(), s);
            if (st != kDeadState) next_live.push_back({pos, st});
        }
        const int next_prompt = strategy_.prompt.step(prompt_state, s);

        ids_.push_back(id);
        stances_.push_back(s);
        for (const auto& c : next_live) {
            if (strategy_.response.accepting(c.response_state)) {
                out_.push_back({tree_.tree_id, ids_, c.split, turn_starts_of(stances_)});
            }
        }
        if (ids_.size() < max_len_ && (next_prompt != kDeadState || !next_live.empty())) {
            for (const auto& child : index_.children(id)) descend(child, next_prompt, next_live);
        }
        ids_.pop_back();
        stances_.pop_back();
    }

    const DebateTree& tree_;
    const TreeIndex& index_;
    const ParsingStrategy& strategy_;
    std::size_t max_len_;
    std::vector<DebatePath>& out_;
    std::vector<std::string> ids_;
    std::vector<Stance> stances_;
};

}  // namespace detail

// All (path, split) pairs: contiguous downward chains of non-root nodes with
// 2 <= length <= max_len whose stances match the strategy at that split.
inline std::vector<DebatePath> enumerate_debate_paths(const DebateTree& tree,
                                                      const ParsingStrategy& strategy,
                                                      const PathLimits& limits = {}) {
    std::vector<DebatePath> out;
    if (limits.max_len < 2) return out;
    const TreeIndex index(tree);
    detail::PathWalker walker(tree, index, strategy, limits.max_len, out);
    if (limits.anchor == PathAnchor::RootChildren) {
        for (const auto& child : index.children(index.root())) walker.walk_from(child);
    } else {
        for (const auto& [id, node] : tree.nodes) {
            if (!node.is_root()) walker.walk_from(id);
        }
    }
    std::sort(out.begin(), out.end(), path_order);
    return out;
}

}  // namespace debate_forge
