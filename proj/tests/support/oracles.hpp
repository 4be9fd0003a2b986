#pragma once

// Reference implementations used only by tests. None of these touch the
// DFA, the incremental walker, or any other code path they are checking.

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "debate_forge/tree.hpp"

namespace oracle {

using debate_forge::DebateTree;
using debate_forge::Stance;

// "[Pro|Con][Pro]*" -> "[PC]P*", evaluated by std::regex over "P"/"C" strings.
inline std::string to_ecma(std::string src) {
    const std::pair<std::string, std::string> repl[] = {
        {"[Pro|Con]", "[PC]"}, {"[Con|Pro]", "[PC]"}, {"[Pro]", "P"}, {"[Con]", "C"}};
    for (const auto& [from, to] : repl) {
        for (auto pos = src.find(from); pos != std::string::npos; pos = src.find(from, pos)) {
            src.replace(pos, from.size(), to);
            pos += to.size();
        }
    }
    return src;
}

inline std::string letters(const std::vector<Stance>& seq) {
    std::string s;
    for (auto x : seq) s.push_back(x == Stance::Pro ? 'P' : 'C');
    return s;
}

struct RegexPattern {
    explicit RegexPattern(const std::string& src) : re(to_ecma(src)) {}
    bool operator()(const std::vector<Stance>& seq) const {
        return std::regex_match(letters(seq), re);
    }
    std::regex re;
};

inline std::vector<Stance> sequence_from_bits(unsigned bits, std::size_t len) {
    std::vector<Stance> seq;
    for (std::size_t i = 0; i < len; ++i) {
        seq.push_back((bits >> i) & 1u ? Stance::Con : Stance::Pro);
    }
    return seq;
}

inline std::vector<std::size_t> splits(const RegexPattern& prompt, const RegexPattern& response,
                                       const std::vector<Stance>& seq) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < seq.size(); ++i) {
        std::vector<Stance> head(seq.begin(), seq.begin() + i), tail(seq.begin() + i, seq.end());
        if (prompt(head) && response(tail)) out.push_back(i);
    }
    return out;
}

using PathKey = std::pair<std::vector<std::string>, std::size_t>;

// Every downward chain, found by walking upward from each possible end node.
inline std::set<PathKey> brute_force_paths(const DebateTree& tree, const std::string& prompt_src,
                                           const std::string& response_src, std::size_t max_len,
                                           bool root_children_only) {
    const RegexPattern prompt(prompt_src), response(response_src);
    std::set<PathKey> out;
    for (const auto& [end_id, end] : tree.nodes) {
        if (end.is_root()) continue;
        std::vector<std::string> chain{end_id};
        std::string cur = end_id;
        while (true) {
            const auto& parent_id = *tree.node(cur).parent_id;
            const auto& parent = tree.node(parent_id);
            std::vector<std::string> path(chain.rbegin(), chain.rend());
            const bool anchored = !root_children_only || parent.is_root();
            if (path.size() >= 2 && path.size() <= max_len && anchored) {
                std::vector<Stance> seq;
                for (const auto& id : path) seq.push_back(*tree.node(id).stance);
                for (auto s : splits(prompt, response, seq)) out.insert({path, s});
            }
            if (parent.is_root() || chain.size() >= max_len) break;
            chain.push_back(parent_id);
            cur = parent_id;
        }
    }
    return out;
}

// exp of mean negative log-probability.
inline double perplexity(const std::vector<double>& token_probs) {
    double s = 0;
    for (double p : token_probs) s -= std::log(p);
    return std::exp(s / static_cast<double>(token_probs.size()));
}

inline std::pair<double, double> mean_sample_std(const std::vector<double>& xs) {
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Occurrences of `gram` as a contiguous run inside any stream, by scanning.
inline std::size_t ngram_occurrences(const std::vector<std::vector<std::string>>& streams,
                                     const std::vector<std::string>& gram) {
    std::size_t n = 0;
    for (const auto& s : streams) {
        if (gram.size() > s.size()) continue;
        for (std::size_t i = 0; i + gram.size() <= s.size(); ++i) {
            if (std::equal(gram.begin(), gram.end(), s.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
        }
    }
    return n;
}

// Stupid backoff straight from the definition, recounting from the streams
// every time. c(h) counts occurrences of h followed by some token.
inline double stupid_backoff(const std::vector<std::vector<std::string>>& streams, std::size_t vocab_size,
                             std::size_t order, double alpha, std::vector<std::string> history,
                             const std::string& t) {
    if (history.size() > order - 1) history.erase(history.begin(), history.end() - (order - 1));
    if (history.empty()) {
        std::size_t total = 0;
        for (const auto& s : streams) total += s.size();
        return (static_cast<double>(ngram_occurrences(streams, {t})) + 1.0) /
               static_cast<double>(total + vocab_size);
    }
    auto gram = history;
    gram.push_back(t);
    const auto joint = ngram_occurrences(streams, gram);
    std::size_t ctx = 0;
    for (const auto& s : streams) {
        for (std::size_t i = 0; i + history.size() < s.size(); ++i) {
            if (std::equal(history.begin(), history.end(), s.begin() + static_cast<std::ptrdiff_t>(i))) ++ctx;
        }
    }
    if (joint > 0) return static_cast<double>(joint) / static_cast<double>(ctx);
    return alpha * stupid_backoff(streams, vocab_size, order, alpha, {history.begin() + 1, history.end()}, t);
}

}  // namespace oracle
