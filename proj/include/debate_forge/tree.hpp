#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "debate_forge/error.hpp"
#include "debate_forge/text.hpp"

namespace debate_forge {

enum class Stance { Pro, Con };

inline std::string_view to_string(Stance s) { return s == Stance::Pro ? "Pro" : "Con"; }

struct ArgumentNode {
    std::string id;
    std::optional<std::string> parent_id;  // absent only for the thesis
    std::optional<Stance> stance;          // absent only for the thesis
    std::string text;
    std::optional<std::string> ref_target;

    bool is_root() const { return !parent_id.has_value(); }
    friend bool operator==(const ArgumentNode&, const ArgumentNode&) = default;
};

struct DebateTree {
    std::string tree_id;
    std::string title;
    std::map<std::string, ArgumentNode> nodes;

    const ArgumentNode& node(const std::string& id) const { return nodes.at(id); }

    // Id of the unique parentless node; throws when there is none.
    const std::string& root_id() const {
        for (const auto& [id, n] : nodes) {
            if (n.is_root()) return id;
        }
        throw Error("tree '" + tree_id + "' has no root");
    }

    friend bool operator==(const DebateTree&, const DebateTree&) = default;
};

// Orders ids like "1.2" < "1.10": digit runs compare numerically.
inline bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    while (i < a.size() && j < b.size()) {
        if (is_digit(a[i]) && is_digit(b[j])) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && is_digit(a[ie])) ++ie;
            while (je < b.size() && is_digit(b[je])) ++je;
            auto da = a.substr(i, ie - i), db = b.substr(j, je - j);
            while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
            while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
            if (da.size() != db.size()) return da.size() < db.size();
            if (da != db) return da < db;
            i = ie, j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i, ++j;
        }
    }
    return a.size() - i < b.size() - j || (a.size() - i == b.size() - j && a < b);
}

// Child lists for a tree whose parent links are already known to be sound.
class TreeIndex {
public:
    explicit TreeIndex(const DebateTree& tree) {
        for (const auto& [id, n] : tree.nodes) {
            if (n.parent_id) {
                children_[*n.parent_id].push_back(id);
            } else {
                root_ = id;
            }
        }
        for (auto& [_, kids] : children_) {
            std::sort(kids.begin(), kids.end(),
                      [](const std::string& a, const std::string& b) { return natural_less(a, b); });
        }
    }

    const std::string& root() const { return root_; }

    const std::vector<std::string>& children(const std::string& id) const {
        static const std::vector<std::string> none;
        auto it = children_.find(id);
        return it == children_.end() ? none : it->second;
    }

private:
    std::string root_;
    std::map<std::string, std::vector<std::string>> children_;
};

struct TreeViolation {
    enum class Kind { Cycle, MultipleRoots, Orphan, MissingStance, DanglingReference, EmptyText };

    Kind kind;
    std::optional<std::string> node_id;

    friend bool operator==(const TreeViolation&, const TreeViolation&) = default;
};

inline std::string_view to_string(TreeViolation::Kind k) {
    switch (k) {
        case TreeViolation::Kind::Cycle: return "Cycle";
        case TreeViolation::Kind::MultipleRoots: return "MultipleRoots";
        case TreeViolation::Kind::Orphan: return "Orphan";
        case TreeViolation::Kind::MissingStance: return "MissingStance";
        case TreeViolation::Kind::DanglingReference: return "DanglingReference";
        case TreeViolation::Kind::EmptyText: return "EmptyText";
    }
    return "?";
}

// Reports every broken invariant. A tree with zero roots reports MultipleRoots
// with no node id; nodes whose ancestry loops report Cycle, nodes hanging off
// a missing parent report Orphan.
inline std::vector<TreeViolation> validate_tree(const DebateTree& tree) {
    using K = TreeViolation::Kind;
    std::vector<TreeViolation> out;

    std::vector<std::string> roots;
    for (const auto& [id, n] : tree.nodes) {
        if (n.is_root()) roots.push_back(id);
    }
    if (roots.empty()) {
        out.push_back({K::MultipleRoots, std::nullopt});
    } else if (roots.size() > 1) {
        for (std::size_t i = 1; i < roots.size(); ++i) out.push_back({K::MultipleRoots, roots[i]});
    }

    // 0 = unknown, 1 = reaches a root, 2 = broken (cycle or orphan).
    std::map<std::string, int> state;
    for (const auto& [id, n] : tree.nodes) {
        if (state.count(id)) continue;
        std::vector<std::string> chain;
        std::set<std::string> on_chain;
        std::string cur = id;
        int verdict = 0;
        K reason = K::Orphan;
        while (true) {
            if (auto it = state.find(cur); it != state.end()) {
                verdict = it->second;
                break;
            }
            if (on_chain.count(cur)) {
                verdict = 2;
                reason = K::Cycle;
                break;
            }
            auto nit = tree.nodes.find(cur);
            if (nit == tree.nodes.end()) {
                verdict = 2;
                reason = K::Orphan;
                break;
            }
            chain.push_back(cur);
            on_chain.insert(cur);
            if (nit->second.is_root()) {
                verdict = 1;
                break;
            }
            cur = *nit->second.parent_id;
        }
        for (const auto& c : chain) state[c] = verdict;
        if (verdict == 2 && !chain.empty()) {
            // Only the node that names the missing parent (or any node on the
            // loop) is reported; its descendants inherit the breakage silently.
            if (reason == K::Cycle) {
                out.push_back({K::Cycle, chain.back()});
            } else if (reason == K::Orphan) {
                out.push_back({K::Orphan, chain.back()});
            }
        }
    }

    for (const auto& [id, n] : tree.nodes) {
        if (!n.is_root() && !n.stance) out.push_back({K::MissingStance, id});
        if (n.is_root() && n.stance) out.push_back({K::MissingStance, id});
        if (n.ref_target && !tree.nodes.count(*n.ref_target)) {
            out.push_back({K::DanglingReference, id});
        }
        if (!n.ref_target && trim(n.text).empty()) out.push_back({K::EmptyText, id});
    }
    return out;
}

// Copies referenced text into referring nodes, chasing chains of references.
// The reference is consumed: output nodes carry text and no ref_target.
inline DebateTree resolve_references(const DebateTree& tree) {
    DebateTree out = tree;
    std::map<std::string, std::string> resolved;
    for (const auto& [id, n] : tree.nodes) {
        if (!n.ref_target) continue;
        std::vector<std::string> chain;
        std::set<std::string> seen;
        std::string cur = id;
        std::string text;
        while (true) {
            if (auto r = resolved.find(cur); r != resolved.end()) {
                text = r->second;
                break;
            }
            if (!seen.insert(cur).second) {
                throw ReferenceError(ReferenceError::Kind::ReferenceCycle, id,
                                     "reference cycle through node '" + cur + "'");
            }
            const auto& node = tree.nodes.at(cur);
            if (!node.ref_target) {
                text = node.text;
                break;
            }
            chain.push_back(cur);
            if (!tree.nodes.count(*node.ref_target)) {
                throw ReferenceError(ReferenceError::Kind::DanglingReference, cur,
                                     "node '" + cur + "' references missing node '" +
                                         *node.ref_target + "'");
            }
            cur = *node.ref_target;
        }
        for (const auto& c : chain) resolved[c] = text;
    }
    for (auto& [id, n] : out.nodes) {
        if (auto r = resolved.find(id); r != resolved.end()) {
            n.text = r->second;
            n.ref_target.reset();
        }
    }
    return out;
}

using StopwordSet = std::unordered_set<std::string>;

// Common English function words used by the default language filter.
inline const StopwordSet& default_english_stopwords() {
    static const StopwordSet words = {
        "the", "of",   "and",  "to",   "a",    "in",    "is",    "it",   "that", "for",
        "was", "on",   "are",  "as",   "with", "be",    "by",    "this", "have", "from",
        "or",  "not",  "but",  "at",   "an",   "they",  "which", "you",  "we",   "his",
        "her", "their", "there", "been", "has", "were", "would", "will", "can",  "all",
        "if",  "more", "no",   "so",   "what", "about", "do",    "i",    "he",   "she",
    };
    return words;
}

// One word per line; blank lines and lines starting with '#' are skipped.
inline StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open stopword file: " + path);
    StopwordSet words;
    std::string line;
    while (std::getline(in, line)) {
        auto w = trim(line);
        if (w.empty() || w.front() == '#') continue;
        words.insert(to_lower(w));
    }
    return words;
}

inline constexpr double kDefaultEnglishThreshold = 0.12;

// Fraction of lowercased tokens, over every node text, that are stopwords.
inline double english_score(const DebateTree& tree,
                            const StopwordSet& stopwords = default_english_stopwords()) {
    if (stopwords.empty()) throw Error("english_score: stopword set is empty");
    std::size_t total = 0, hits = 0;
    const TokenizerConfig cfg{.lowercase = true, .punctuation_is_token = true};
    for (const auto& [_, n] : tree.nodes) {
        for (const auto& tok : tokenize(n.text, cfg)) {
            ++total;
            if (stopwords.count(tok)) ++hits;
        }
    }
    if (total == 0) throw Error("english_score: tree '" + tree.tree_id + "' has no tokens");
    return static_cast<double>(hits) / static_cast<double>(total);
}

// Pluggable language filter; the default is the stopword-fraction heuristic.
using LanguageScorer = std::function<double(const DebateTree&)>;

inline bool is_english(const DebateTree& tree, double threshold = kDefaultEnglishThreshold,
                       const LanguageScorer& scorer = {}) {
    const double score = scorer ? scorer(tree) : english_score(tree);
    return score >= threshold;
}

}  // namespace debate_forge
