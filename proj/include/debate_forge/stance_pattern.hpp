#pragma once

// Regular patterns over the two-letter stance alphabet. Sources are parsed
// into a small AST, lowered to a Thompson NFA, then determinized; matching
// and incremental stepping both run on the DFA.

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debate_forge/error.hpp"
#include "debate_forge/tree.hpp"

namespace debate_forge {

namespace pattern_ast {

inline constexpr unsigned kPro = 1;
inline constexpr unsigned kCon = 2;

struct Node {
    enum class Op { Symbol, Concat, Star, Plus };
    Op op;
    unsigned symbols = 0;  // Symbol: bitmask of kPro/kCon
    std::vector<Node> children;
};

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Node parse() {
        skip_space();
        if (pos_ == src_.size()) throw PatternSyntaxError(pos_, "empty pattern");
        Node n = sequence();
        if (pos_ != src_.size()) throw PatternSyntaxError(pos_, "unbalanced ')'");
        return n;
    }

private:
    Node sequence() {
        Node seq{Node::Op::Concat, 0, {}};
        skip_space();
        while (pos_ < src_.size() && src_[pos_] != ')') {
            seq.children.push_back(item());
            skip_space();
        }
        if (seq.children.empty()) throw PatternSyntaxError(pos_, "empty group");
        if (seq.children.size() == 1) return std::move(seq.children.front());
        return seq;
    }

    Node item() {
        Node n = atom();
        skip_space();
        while (pos_ < src_.size() && (src_[pos_] == '*' || src_[pos_] == '+')) {
            const auto op = src_[pos_] == '*' ? Node::Op::Star : Node::Op::Plus;
            ++pos_;
            Node wrapped{op, 0, {}};
            wrapped.children.push_back(std::move(n));
            n = std::move(wrapped);
            skip_space();
        }
        return n;
    }

    Node atom() {
        const char c = src_[pos_];
        if (c == '[') {
            static constexpr std::array<std::pair<std::string_view, unsigned>, 4> classes{{
                {"[Pro|Con]", kPro | kCon},
                {"[Con|Pro]", kPro | kCon},
                {"[Pro]", kPro},
                {"[Con]", kCon},
            }};
            for (const auto& [text, mask] : classes) {
                if (src_.substr(pos_, text.size()) == text) {
                    pos_ += text.size();
                    return Node{Node::Op::Symbol, mask, {}};
                }
            }
            throw PatternSyntaxError(pos_, "unknown stance class");
        }
        if (c == '(') {
            const std::size_t open = pos_;
            ++pos_;
            Node inner = sequence();
            if (pos_ >= src_.size() || src_[pos_] != ')') {
                throw PatternSyntaxError(open, "unclosed '('");
            }
            ++pos_;
            return inner;
        }
        if (c == '*' || c == '+') throw PatternSyntaxError(pos_, "quantifier without operand");
        throw PatternSyntaxError(pos_, std::string("unexpected character '") + c + "'");
    }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

// Thompson construction; each state has at most one symbol edge.
struct Nfa {
    struct State {
        unsigned symbols = 0;
        int target = -1;
        std::vector<int> eps;
    };
    std::vector<State> states;
    int start = 0;
    int accept = 0;

    int add() {
        states.emplace_back();
        return static_cast<int>(states.size()) - 1;
    }

    std::pair<int, int> build(const Node& n) {
        switch (n.op) {
            case Node::Op::Symbol: {
                const int s = add(), e = add();
                states[s].symbols = n.symbols;
                states[s].target = e;
                return {s, e};
            }
            case Node::Op::Concat: {
                auto [s, e] = build(n.children.front());
                for (std::size_t i = 1; i < n.children.size(); ++i) {
                    auto [cs, ce] = build(n.children[i]);
                    states[e].eps.push_back(cs);
                    e = ce;
                }
                return {s, e};
            }
            case Node::Op::Star:
            case Node::Op::Plus: {
                auto [cs, ce] = build(n.children.front());
                const int s = add(), e = add();
                states[s].eps.push_back(cs);
                if (n.op == Node::Op::Star) states[s].eps.push_back(e);
                states[ce].eps.push_back(cs);
                states[ce].eps.push_back(e);
                return {s, e};
            }
        }
        return {-1, -1};
    }

    std::vector<int> closure(std::vector<int> set) const {
        std::vector<bool> in(states.size(), false);
        for (int s : set) in[s] = true;
        for (std::size_t i = 0; i < set.size(); ++i) {
            for (int t : states[set[i]].eps) {
                if (!in[t]) {
                    in[t] = true;
                    set.push_back(t);
                }
            }
        }
        std::vector<int> out;
        for (std::size_t s = 0; s < in.size(); ++s) {
            if (in[s]) out.push_back(static_cast<int>(s));
        }
        return out;
    }
};

}  // namespace pattern_ast

inline constexpr int kDeadState = -1;

class StancePattern {
public:
    StancePattern() = default;

    static StancePattern compile(std::string_view source) {
        using namespace pattern_ast;
        const Node ast = Parser(source).parse();
        Nfa nfa;
        auto [s, e] = nfa.build(ast);
        nfa.start = s;
        nfa.accept = e;

        StancePattern p;
        p.source_ = std::string(source);
        std::map<std::vector<int>, int> ids;
        std::vector<std::vector<int>> pending;
        const auto intern = [&](std::vector<int> set) {
            if (set.empty()) return kDeadState;
            auto [it, fresh] = ids.emplace(set, static_cast<int>(ids.size()));
            if (fresh) {
                pending.push_back(set);
                p.next_.push_back({kDeadState, kDeadState});
                bool acc = false;
                for (int st : set) acc = acc || st == nfa.accept;
                p.accepting_.push_back(acc);
            }
            return it->second;
        };
        intern(nfa.closure({nfa.start}));
        for (std::size_t i = 0; i < pending.size(); ++i) {
            const auto set = pending[i];
            for (unsigned sym : {kPro, kCon}) {
                std::vector<int> moved;
                for (int st : set) {
                    if (nfa.states[st].symbols & sym) moved.push_back(nfa.states[st].target);
                }
                const int to = intern(moved.empty() ? moved : nfa.closure(moved));
                p.next_[i][sym == kPro ? 0 : 1] = to;
            }
        }
        return p;
    }

    const std::string& source() const { return source_; }
    std::size_t state_count() const { return next_.size(); }

    int start() const { return 0; }

    int step(int state, Stance s) const {
        if (state == kDeadState) return kDeadState;
        return next_[state][s == Stance::Pro ? 0 : 1];
    }

    bool accepting(int state) const { return state != kDeadState && accepting_[state]; }

    bool matches(std::span<const Stance> seq) const {
        int st = start();
        for (Stance s : seq) {
            st = step(st, s);
            if (st == kDeadState) return false;
        }
        return accepting(st);
    }

private:
    std::string source_;
    std::vector<std::array<int, 2>> next_;
    std::vector<bool> accepting_;
};

inline StancePattern compile_stance_pattern(std::string_view source) {
    return StancePattern::compile(source);
}

inline bool pattern_matches(const StancePattern& p, std::span<const Stance> seq) {
    return p.matches(seq);
}

}  // namespace debate_forge
