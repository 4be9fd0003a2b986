#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "debate_forge/corpus.hpp"
#include "debate_forge/error.hpp"
#include "debate_forge/generation.hpp"
#include "debate_forge/strategy.hpp"
#include "debate_forge/text.hpp"
#include "debate_forge/tree_io.hpp"

namespace debate_forge {

enum class Speaker { Alice, Bob, Human };

inline const char* to_string(Speaker s) {
    switch (s) {
        case Speaker::Alice: return "Alice";
        case Speaker::Bob: return "Bob";
        case Speaker::Human: return "Human";
    }
    return "?";
}

inline std::optional<Speaker> parse_speaker(std::string_view s) {
    if (s == "Alice") return Speaker::Alice;
    if (s == "Bob") return Speaker::Bob;
    if (s == "Human") return Speaker::Human;
    return std::nullopt;
}

// Agent side for the turn at 0-based `index`.
inline Speaker agent_for_turn(std::size_t index) { return index % 2 == 0 ? Speaker::Alice : Speaker::Bob; }

namespace detail {

inline bool glue_left(const Token& t) {
    static const std::set<Token> closers{".", ",", "!", "?", ";", ":", ")", "]", "}", "%", "’", "”"};
    return closers.count(t) != 0;
}

inline bool glue_right(const Token& t) {
    static const std::set<Token> openers{"(", "[", "{", "‘", "“"};
    return openers.count(t) != 0;
}

// Underscore runs in ordinary tokens shrink to one so that "___" can only
// come from <unk>.
inline Token display_token(const Token& t) {
    Token out;
    for (char c : t) {
        if (c == '_' && !out.empty() && out.back() == '_') continue;
        out.push_back(c);
    }
    return out;
}

}  // namespace detail

inline const std::string kUnkDisplay = "___";

// <unk> shows as "___"; <eoa>, <turn> and <eos> are dropped; punctuation
// attaches to its neighbour.
inline std::string display_text(const Tokens& tokens) {
    std::string out;
    bool glue_next = true;
    for (const auto& t : tokens) {
        if (t == special::kEoa || t == special::kTurn || t == special::kEos) continue;
        const Token shown = t == special::kUnk ? kUnkDisplay : detail::display_token(t);
        if (!glue_next && !detail::glue_left(t)) out.push_back(' ');
        out += shown;
        glue_next = detail::glue_right(t);
    }
    return out;
}

struct DebateTurn {
    Speaker speaker = Speaker::Alice;
    Tokens tokens;
    std::string display_text;

    friend bool operator==(const DebateTurn&, const DebateTurn&) = default;
};

inline DebateTurn make_turn(Speaker speaker, Tokens tokens) {
    DebateTurn t{speaker, std::move(tokens), {}};
    t.display_text = display_text(t.tokens);
    return t;
}

enum class HistoryMode { Full, LastResponse };

inline const char* to_string(HistoryMode m) { return m == HistoryMode::Full ? "full" : "last-response"; }

inline std::optional<HistoryMode> parse_history_mode(std::string_view s) {
    if (s == "full") return HistoryMode::Full;
    if (s == "last-response") return HistoryMode::LastResponse;
    return std::nullopt;
}

struct DebateConfig {
    int max_turns = 10;
    std::string backend = "echo";
    std::uint64_t seed = 0;
    HistoryMode history = HistoryMode::Full;
    int max_prompt_tokens = 512;
    int max_tokens = 60;
    double temperature = 1.0;
    // Restricts max_turns to 5..15.
    bool strict_turn_range = false;

    friend bool operator==(const DebateConfig&, const DebateConfig&) = default;
};

struct DebateTranscript {
    std::string debate_id;
    std::string subject;
    DebateConfig config;
    std::vector<DebateTurn> turns;

    bool full() const { return turns.size() >= static_cast<std::size_t>(config.max_turns); }

    friend bool operator==(const DebateTranscript&, const DebateTranscript&) = default;
};

inline Tokens subject_tokens(const std::string& subject) { return tokenize(subject); }

inline void check_config(const DebateConfig& c) {
    if (c.max_turns < 1) throw DebateError(DebateError::Kind::Precondition, "max_turns must be at least 1");
    if (c.strict_turn_range && (c.max_turns < 5 || c.max_turns > 15)) {
        throw DebateError(DebateError::Kind::Precondition, "strict_turn_range needs 5 to 15 turns");
    }
    if (c.max_tokens < 1) throw DebateError(DebateError::Kind::Precondition, "max_tokens must be at least 1");
    if (c.max_prompt_tokens < 1) {
        throw DebateError(DebateError::Kind::Precondition, "max_prompt_tokens must be at least 1");
    }
}

// Prompt for the next turn. Full history is subject <turn> t1 <turn> ... tk,
// dropping the oldest turns (never the subject) past max_prompt_tokens.
inline Tokens next_prompt(const DebateTranscript& t) {
    const auto subject = subject_tokens(t.subject);
    if (t.config.history == HistoryMode::LastResponse) return t.turns.empty() ? subject : t.turns.back().tokens;

    const auto limit = static_cast<std::size_t>(t.config.max_prompt_tokens);
    std::size_t first = 0;
    std::size_t length = subject.size();
    for (const auto& turn : t.turns) length += 1 + turn.tokens.size();
    while (length > limit && first + 1 < t.turns.size()) length -= 1 + t.turns[first++].tokens.size();

    Tokens prompt = subject;
    for (std::size_t i = first; i < t.turns.size(); ++i) {
        prompt.push_back(special::kTurn);
        prompt.insert(prompt.end(), t.turns[i].tokens.begin(), t.turns[i].tokens.end());
    }
    return prompt;
}

namespace detail {

// Separators and end markers never survive into a stored turn.
inline Tokens turn_tokens(const Tokens& response) {
    Tokens out;
    for (const auto& tok : response) {
        if (tok != special::kTurn && tok != special::kEos) out.push_back(tok);
    }
    return out;
}

inline DebateTurn agent_turn(const DebateTranscript& t, GeneratorBackend& backend) {
    GenerationRequest req;
    req.prompt = next_prompt(t);
    req.max_tokens = t.config.max_tokens;
    req.temperature = t.config.temperature;
    req.seed = t.config.seed + t.turns.size();
    return make_turn(agent_for_turn(t.turns.size()), turn_tokens(backend.generate(req)));
}

}  // namespace detail

inline std::string default_debate_id(const std::string& subject, std::uint64_t seed) {
    return "debate-" + detail::fnv1a_hex(subject + '\n' + std::to_string(seed));
}

inline DebateTranscript new_debate(const std::string& subject, GeneratorBackend& backend, DebateConfig config,
                                   std::string debate_id = {}) {
    check_config(config);
    if (subject_tokens(subject).empty()) {
        throw DebateError(DebateError::Kind::Precondition, "subject has no tokens");
    }
    DebateTranscript t;
    t.debate_id = debate_id.empty() ? default_debate_id(subject, config.seed) : std::move(debate_id);
    t.subject = subject;
    t.config = std::move(config);
    t.turns.push_back(detail::agent_turn(t, backend));
    return t;
}

// With `human_text` the text becomes the next turn and the backend is not
// called. A human takes the side whose turn it is.
inline DebateTranscript advance_turn(DebateTranscript t, GeneratorBackend& backend,
                                     const std::optional<std::string>& human_text = std::nullopt) {
    if (t.full()) throw DebateError(DebateError::Kind::DebateFull, "debate " + t.debate_id + " is full");
    if (human_text) {
        auto tokens = tokenize(*human_text);
        if (tokens.empty()) throw DebateError(DebateError::Kind::Precondition, "human turn has no tokens");
        if (!t.turns.empty() && t.turns.back().speaker == Speaker::Human) {
            throw DebateError(DebateError::Kind::Precondition, "two human turns in a row");
        }
        t.turns.push_back(make_turn(Speaker::Human, detail::turn_tokens(tokens)));
        return t;
    }
    t.turns.push_back(detail::agent_turn(t, backend));
    return t;
}

inline DebateTranscript run_debate(const std::string& subject, GeneratorBackend& backend, int turns,
                                   std::uint64_t seed, DebateConfig config = {}) {
    config.max_turns = turns;
    config.seed = seed;
    auto t = new_debate(subject, backend, std::move(config));
    while (!t.full()) t = advance_turn(std::move(t), backend);
    return t;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::ordered_json config_to_json(const DebateConfig& c) {
    nlohmann::ordered_json j;
    j["max_turns"] = c.max_turns;
    j["backend"] = c.backend;
    j["seed"] = c.seed;
    j["history"] = to_string(c.history);
    j["max_prompt_tokens"] = c.max_prompt_tokens;
    j["max_tokens"] = c.max_tokens;
    j["temperature"] = c.temperature;
    j["strict_turn_range"] = c.strict_turn_range;
    return j;
}

inline nlohmann::ordered_json transcript_to_json(const DebateTranscript& t) {
    nlohmann::ordered_json j;
    j["debate_id"] = t.debate_id;
    j["subject"] = t.subject;
    j["config"] = config_to_json(t.config);
    auto turns = nlohmann::ordered_json::array();
    for (const auto& turn : t.turns) {
        nlohmann::ordered_json tj;
        tj["speaker"] = to_string(turn.speaker);
        tj["tokens"] = turn.tokens;
        tj["display_text"] = turn.display_text;
        turns.push_back(std::move(tj));
    }
    j["turns"] = std::move(turns);
    return j;
}

inline DebateTranscript transcript_from_json(const nlohmann::json& j) {
    try {
        DebateTranscript t;
        t.debate_id = j.at("debate_id").get<std::string>();
        t.subject = j.at("subject").get<std::string>();
        const auto& c = j.at("config");
        DebateConfig defaults;
        t.config.max_turns = c.value("max_turns", defaults.max_turns);
        t.config.backend = c.value("backend", defaults.backend);
        t.config.seed = c.value("seed", defaults.seed);
        const auto history = parse_history_mode(c.value("history", std::string("full")));
        if (!history) throw DebateError(DebateError::Kind::Precondition, "unknown history mode");
        t.config.history = *history;
        t.config.max_prompt_tokens = c.value("max_prompt_tokens", defaults.max_prompt_tokens);
        t.config.max_tokens = c.value("max_tokens", defaults.max_tokens);
        t.config.temperature = c.value("temperature", defaults.temperature);
        t.config.strict_turn_range = c.value("strict_turn_range", defaults.strict_turn_range);
        for (const auto& tj : j.at("turns")) {
            const auto speaker = parse_speaker(tj.at("speaker").get<std::string>());
            if (!speaker) throw DebateError(DebateError::Kind::Precondition, "unknown speaker");
            // display_text is derived, so it is recomputed rather than trusted.
            t.turns.push_back(make_turn(*speaker, tj.at("tokens").get<Tokens>()));
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw DebateError(DebateError::Kind::Precondition, std::string("bad transcript JSON: ") + e.what());
    }
}

// A human-written exchange from a debate path: one turn per turn block,
// arguments in a block joined by <eoa>, speakers alternating from Alice.
inline DebateTranscript transcript_from_path(const DebateTree& tree, const std::vector<std::string>& node_ids,
                                             const TokenizerConfig& cfg = {}) {
    DebateTranscript t;
    t.subject = tree.title.empty() ? tree.node(tree.root_id()).text : tree.title;
    const auto stances = path_stances(tree, node_ids);
    for (const auto& block : turn_blocks(stances)) {
        Tokens tokens;
        for (std::size_t i = block.begin; i < block.end; ++i) {
            if (i > block.begin) tokens.push_back(special::kEoa);
            const auto arg = tokenize(tree.node(node_ids[i]).text, cfg);
            tokens.insert(tokens.end(), arg.begin(), arg.end());
        }
        t.turns.push_back(make_turn(agent_for_turn(t.turns.size()), std::move(tokens)));
    }
    t.config.max_turns = static_cast<int>(std::max<std::size_t>(t.turns.size(), 1));
    t.config.backend = "human";
    std::string joined;
    for (const auto& id : node_ids) joined += id + '/';
    t.debate_id = tree.tree_id + ":" + detail::fnv1a_hex(joined);
    return t;
}

}  // namespace debate_forge
