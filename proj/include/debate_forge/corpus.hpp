#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "debate_forge/error.hpp"
#include "debate_forge/random.hpp"
#include "debate_forge/strategy.hpp"
#include "debate_forge/text.hpp"
#include "debate_forge/tree.hpp"

namespace debate_forge {

namespace special {
inline const Token kUnk = "<unk>";
inline const Token kEoa = "<eoa>";
inline const Token kTurn = "<turn>";
inline const Token kEos = "<eos>";
inline const Token kEnt = "<ent>";

inline const std::array<Token, 5>& all() {
    static const std::array<Token, 5> tokens{kUnk, kEoa, kTurn, kEos, kEnt};
    return tokens;
}

inline bool is_special(const Token& t) {
    return std::find(all().begin(), all().end(), t) != all().end();
}
}  // namespace special

struct ExamplePair {
    Tokens prompt;
    Tokens response;
    StrategyName strategy = StrategyName::Complex;
    std::string tree_id;
    std::vector<std::string> node_ids;
    std::size_t split_index = 0;

    friend bool operator==(const ExamplePair&, const ExamplePair&) = default;
};

class Vocabulary {
public:
    Vocabulary() : Vocabulary(std::vector<Token>{}) {}

    // Specials first, then `tokens` in the given order (duplicates ignored).
    explicit Vocabulary(const std::vector<Token>& tokens, std::size_t min_count = 1)
        : min_count_(min_count) {
        for (const auto& s : special::all()) add(s);
        for (const auto& t : tokens) add(t);
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<Token>& tokens() const { return tokens_; }
    bool contains(const Token& t) const { return ids_.count(t) != 0; }
    std::size_t min_count() const { return min_count_; }

    // Id of `t`, or of <unk> when absent.
    int id(const Token& t) const {
        auto it = ids_.find(t);
        return it == ids_.end() ? ids_.at(special::kUnk) : it->second;
    }
    const Token& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    // Raw training counts for every token seen, kept or not.
    const std::map<Token, std::size_t>& counts() const { return counts_; }
    void set_counts(std::map<Token, std::size_t> counts) { counts_ = std::move(counts); }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.tokens_ == b.tokens_;
    }

private:
    void add(const Token& t) {
        if (ids_.emplace(t, static_cast<int>(tokens_.size())).second) tokens_.push_back(t);
    }

    std::vector<Token> tokens_;
    std::unordered_map<Token, int> ids_;
    std::map<Token, std::size_t> counts_;
    std::size_t min_count_ = 1;
};

// Keeps tokens seen at least `min_count` times in the training pairs; ids are
// specials first, then by descending count, ties alphabetical.
inline Vocabulary build_vocabulary(std::span<const ExamplePair> train, std::size_t min_count) {
    if (min_count < 1) throw CorpusError("min_count must be at least 1");
    if (train.empty()) throw CorpusError("cannot build a vocabulary from an empty training split");
    std::map<Token, std::size_t> counts;
    for (const auto& ex : train) {
        for (const auto* side : {&ex.prompt, &ex.response}) {
            for (const auto& t : *side) {
                if (!special::is_special(t)) ++counts[t];
            }
        }
    }
    std::vector<std::pair<Token, std::size_t>> kept;
    for (const auto& [t, c] : counts) {
        if (c >= min_count) kept.emplace_back(t, c);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<Token> order;
    for (auto& [t, _] : kept) order.push_back(t);
    Vocabulary v(order, min_count);
    v.set_counts(std::move(counts));
    return v;
}

inline Tokens encode_tokens(const Tokens& tokens, const Vocabulary& vocab) {
    Tokens out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(vocab.contains(t) ? t : special::kUnk);
    return out;
}

using EntityTagger = std::function<Tokens(const Tokens&)>;

// Capitalization-run heuristic. Each maximal run of capitalized tokens
// becomes one <ent>. A capitalized function word ("The", "I") is left alone
// when it opens a sentence or stands by itself. Expects original casing.
inline Tokens tag_entities(const Tokens& tokens) {
    const auto& function_words = default_english_stopwords();
    const auto is_function_word = [&](const Token& t) { return function_words.count(to_lower(t)) != 0; };
    const auto sentence_start = [&](std::size_t i) {
        if (i == 0) return true;
        const auto& prev = tokens[i - 1];
        return prev == "." || prev == "!" || prev == "?" || prev == special::kEoa || prev == special::kTurn;
    };

    Tokens out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (special::is_special(tokens[i]) || !starts_with_upper(tokens[i])) {
            out.push_back(tokens[i++]);
            continue;
        }
        std::size_t end = i;
        while (end < tokens.size() && !special::is_special(tokens[end]) && starts_with_upper(tokens[end])) {
            ++end;
        }
        if (sentence_start(i) && is_function_word(tokens[i])) out.push_back(tokens[i++]);
        if (i == end) continue;
        if (end - i == 1 && is_function_word(tokens[i])) {
            out.push_back(tokens[i]);
        } else {
            out.push_back(special::kEnt);
        }
        i = end;
    }
    return out;
}

namespace detail {

inline Tokens argument_tokens(const std::string& text, const TokenizerConfig& cfg,
                              const EntityTagger& tagger) {
    const TokenizerConfig cased{.lowercase = false, .punctuation_is_token = cfg.punctuation_is_token};
    Tokens toks = tokenize(text, cased);
    if (tagger) toks = tagger(toks);
    if (cfg.lowercase) {
        for (auto& t : toks) {
            if (!special::is_special(t)) t = to_lower(t);
        }
    }
    return toks;
}

}  // namespace detail

// Arguments within a turn block are joined by <eoa>; multi-turn prompts join
// blocks with <turn>; the response ends with <eos>. Entity tagging, when a
// tagger is supplied, runs per argument before lowercasing.
inline ExamplePair render_example(const DebatePath& path, const DebateTree& tree, StrategyName strategy,
                                  const TokenizerConfig& cfg = {}, const EntityTagger& tagger = {}) {
    if (path.split_index == 0 || path.split_index >= path.node_ids.size()) {
        throw CorpusError("path split index out of range");
    }
    ExamplePair ex;
    ex.strategy = strategy;
    ex.tree_id = path.tree_id;
    ex.node_ids = path.node_ids;
    ex.split_index = path.split_index;

    const std::span<const std::string> ids(path.node_ids);
    const auto prompt_ids = ids.first(path.split_index);
    const auto prompt_stances = path_stances(tree, prompt_ids);
    const Token& block_sep = strategy == StrategyName::MultiTurn ? special::kTurn : special::kEoa;
    for (const auto& block : turn_blocks(prompt_stances)) {
        if (block.begin > 0) ex.prompt.push_back(block_sep);
        for (std::size_t i = block.begin; i < block.end; ++i) {
            if (i > block.begin) ex.prompt.push_back(special::kEoa);
            auto toks = detail::argument_tokens(tree.node(prompt_ids[i]).text, cfg, tagger);
            ex.prompt.insert(ex.prompt.end(), toks.begin(), toks.end());
        }
    }
    const auto response_ids = ids.subspan(path.split_index);
    for (std::size_t i = 0; i < response_ids.size(); ++i) {
        if (i > 0) ex.response.push_back(special::kEoa);
        auto toks = detail::argument_tokens(tree.node(response_ids[i]).text, cfg, tagger);
        ex.response.insert(ex.response.end(), toks.begin(), toks.end());
    }
    ex.response.push_back(special::kEos);
    return ex;
}

struct SplitRatios {
    double train = 0.90;
    double valid = 0.05;
    double test = 0.05;
};

struct TreePartition {
    std::vector<std::string> train;
    std::vector<std::string> valid;
    std::vector<std::string> test;
};

// Largest-remainder apportionment of n items; ties go to the earlier bucket.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
    const std::array<double, 3> ratios{r.train, r.valid, r.test};
    for (double x : ratios) {
        if (!(x >= 0.0)) throw CorpusError("split ratios must be non-negative");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw CorpusError("split ratios must sum to 1");
    }
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double target = ratios[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(target + 1e-9));
        rem[i] = target - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i) {
            if (rem[i] > rem[best] + 1e-12) best = i;
        }
        ++sizes[best];
        rem[best] = -1.0;
        ++assigned;
    }
    while (assigned > n) {  // only reachable through float slack
        for (std::size_t i = 3; i-- > 0;) {
            if (sizes[i] > 0) {
                --sizes[i];
                --assigned;
                break;
            }
        }
    }
    return sizes;
}

// Whole trees go to exactly one split; assignment is a seeded shuffle of the
// sorted ids.
inline TreePartition partition_trees(std::vector<std::string> tree_ids, const SplitRatios& ratios,
                                     std::uint64_t seed) {
    if (tree_ids.empty()) throw CorpusError("partition_trees needs at least one tree");
    std::sort(tree_ids.begin(), tree_ids.end());
    if (std::adjacent_find(tree_ids.begin(), tree_ids.end()) != tree_ids.end()) {
        throw CorpusError("duplicate tree ids");
    }
    const auto sizes = split_sizes(tree_ids.size(), ratios);
    Rng rng(seed);
    rng.shuffle(tree_ids);
    TreePartition p;
    auto it = tree_ids.begin();
    p.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
    it += static_cast<std::ptrdiff_t>(sizes[0]);
    p.valid.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
    it += static_cast<std::ptrdiff_t>(sizes[1]);
    p.test.assign(it, tree_ids.end());
    for (auto* v : {&p.train, &p.valid, &p.test}) std::sort(v->begin(), v->end());
    return p;
}

inline TreePartition partition_trees(std::span<const DebateTree> trees, const SplitRatios& ratios,
                                     std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& t : trees) ids.push_back(t.tree_id);
    return partition_trees(std::move(ids), ratios, seed);
}

struct CorpusStats {
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
    std::size_t prompt_dictionary_size = 0;
    std::size_t response_dictionary_size = 0;

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

struct Corpus {
    std::vector<ExamplePair> train;
    std::vector<ExamplePair> valid;
    std::vector<ExamplePair> test;
    Vocabulary vocab;
    CorpusStats stats;
    // Distinct non-special tokens in raw (pre-<unk>) training prompts / responses.
    std::size_t raw_prompt_types = 0;
    std::size_t raw_response_types = 0;
};

inline CorpusStats corpus_statistics(const Corpus& corpus) {
    return {corpus.train.size(), corpus.valid.size(), corpus.test.size(), corpus.raw_prompt_types,
            corpus.raw_response_types};
}

struct CorpusOptions {
    TokenizerConfig tokenizer;
    std::size_t min_count = 10;
    std::uint64_t seed = 0;
    SplitRatios ratios;
    PathLimits limits;
    // Replaces capitalized runs with <ent>; `tagger` overrides the built-in rule.
    bool tag_entities = false;
    EntityTagger tagger;
};

namespace detail {

inline void dedupe(std::vector<ExamplePair>& examples) {
    std::set<std::pair<Tokens, Tokens>> seen;
    std::vector<ExamplePair> kept;
    for (auto& ex : examples) {
        if (seen.emplace(ex.prompt, ex.response).second) kept.push_back(std::move(ex));
    }
    examples = std::move(kept);
}

}  // namespace detail

// resolve references -> partition -> enumerate -> render (+ entity tagging)
// -> vocabulary from train -> encode -> drop exact duplicate pairs within
// each split.
inline Corpus build_corpus(std::span<const DebateTree> trees, const ParsingStrategy& strategy,
                           const CorpusOptions& opts = {}) {
    // Reference nodes carry no text of their own.
    std::map<std::string, DebateTree> by_id;
    for (const auto& t : trees) {
        if (!by_id.emplace(t.tree_id, resolve_references(t)).second) {
            throw CorpusError("duplicate tree id '" + t.tree_id + "'");
        }
    }
    const auto partition = partition_trees(trees, opts.ratios, opts.seed);

    EntityTagger tagger;
    if (opts.tag_entities) tagger = opts.tagger ? opts.tagger : EntityTagger(tag_entities);

    const auto render_split = [&](const std::vector<std::string>& ids) {
        std::vector<ExamplePair> out;
        for (const auto& id : ids) {
            const DebateTree& tree = by_id.at(id);
            for (const auto& path : enumerate_debate_paths(tree, strategy, opts.limits)) {
                out.push_back(render_example(path, tree, strategy.name, opts.tokenizer, tagger));
            }
        }
        return out;
    };

    Corpus corpus;
    corpus.train = render_split(partition.train);
    corpus.valid = render_split(partition.valid);
    corpus.test = render_split(partition.test);

    corpus.vocab = build_vocabulary(corpus.train, opts.min_count);
    std::set<Token> prompt_types, response_types;
    for (const auto& ex : corpus.train) {
        for (const auto& t : ex.prompt) {
            if (!special::is_special(t)) prompt_types.insert(t);
        }
        for (const auto& t : ex.response) {
            if (!special::is_special(t)) response_types.insert(t);
        }
    }
    corpus.raw_prompt_types = prompt_types.size();
    corpus.raw_response_types = response_types.size();

    for (auto* split : {&corpus.train, &corpus.valid, &corpus.test}) {
        for (auto& ex : *split) {
            ex.prompt = encode_tokens(ex.prompt, corpus.vocab);
            ex.response = encode_tokens(ex.response, corpus.vocab);
        }
        detail::dedupe(*split);
    }
    corpus.stats = corpus_statistics(corpus);
    return corpus;
}

// ---- serialization -------------------------------------------------------

inline nlohmann::ordered_json example_to_json(const ExamplePair& ex) {
    nlohmann::ordered_json j;
    j["prompt"] = ex.prompt;
    j["response"] = ex.response;
    j["strategy"] = std::string(to_string(ex.strategy));
    j["tree_id"] = ex.tree_id;
    j["node_ids"] = ex.node_ids;
    j["split_index"] = ex.split_index;
    return j;
}

inline ExamplePair example_from_json(const nlohmann::json& j) {
    ExamplePair ex;
    try {
        ex.prompt = j.at("prompt").get<Tokens>();
        ex.response = j.at("response").get<Tokens>();
        const auto name = parse_strategy_name(j.at("strategy").get<std::string>());
        if (!name) throw CorpusError("unknown strategy in corpus record");
        ex.strategy = *name;
        ex.tree_id = j.at("tree_id").get<std::string>();
        ex.node_ids = j.at("node_ids").get<std::vector<std::string>>();
        ex.split_index = j.at("split_index").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(std::string("malformed corpus record: ") + e.what());
    }
    return ex;
}

inline nlohmann::ordered_json stats_to_json(const CorpusStats& s) {
    nlohmann::ordered_json j;
    j["train_examples"] = s.train;
    j["valid_examples"] = s.valid;
    j["test_examples"] = s.test;
    j["prompt_dictionary_size"] = s.prompt_dictionary_size;
    j["response_dictionary_size"] = s.response_dictionary_size;
    return j;
}

inline CorpusStats stats_from_json(const nlohmann::json& j) {
    CorpusStats s;
    s.train = j.at("train_examples");
    s.valid = j.at("valid_examples");
    s.test = j.at("test_examples");
    s.prompt_dictionary_size = j.at("prompt_dictionary_size");
    s.response_dictionary_size = j.at("response_dictionary_size");
    return s;
}

// Table-style summary, one column per labelled corpus.
inline std::string format_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& cols) {
    const std::vector<std::pair<std::string, std::size_t CorpusStats::*>> rows{
        {"# Training examples", &CorpusStats::train},
        {"# Test examples", &CorpusStats::test},
        {"# Validation examples", &CorpusStats::valid},
        {"Prompt dictionary size", &CorpusStats::prompt_dictionary_size},
        {"Response dictionary size", &CorpusStats::response_dictionary_size},
    };
    std::size_t label_w = 0;
    for (const auto& [label, _] : rows) label_w = std::max(label_w, label.size());
    std::vector<std::size_t> widths;
    for (const auto& [name, s] : cols) {
        std::size_t w = name.size();
        for (const auto& [_, field] : rows) w = std::max(w, std::to_string(s.*field).size());
        widths.push_back(w);
    }
    std::ostringstream out;
    const auto pad_left = [](const std::string& s, std::size_t w) { return std::string(w - s.size(), ' ') + s; };
    out << std::string(label_w, ' ');
    for (std::size_t c = 0; c < cols.size(); ++c) out << "  " << pad_left(cols[c].first, widths[c]);
    out << '\n';
    for (const auto& [label, field] : rows) {
        out << label << std::string(label_w - label.size(), ' ');
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out << "  " << pad_left(std::to_string(cols[c].second.*field), widths[c]);
        }
        out << '\n';
    }
    return out.str();
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write " + path.string());
    out << content;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

// Writes {train,valid,test}.jsonl, vocab.txt, stats.json and, when asked,
// {split}.source / {split}.target parallel text.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir, bool parallel_text = true) {
    std::filesystem::create_directories(dir);
    const std::pair<const char*, const std::vector<ExamplePair>*> splits[] = {
        {"train", &corpus.train}, {"valid", &corpus.valid}, {"test", &corpus.test}};
    for (const auto& [name, examples] : splits) {
        std::string jsonl, source, target;
        for (const auto& ex : *examples) {
            jsonl += example_to_json(ex).dump() + "\n";
            source += join(ex.prompt) + "\n";
            target += join(ex.response) + "\n";
        }
        detail::write_text(dir / (std::string(name) + ".jsonl"), jsonl);
        if (parallel_text) {
            detail::write_text(dir / (std::string(name) + ".source"), source);
            detail::write_text(dir / (std::string(name) + ".target"), target);
        }
    }
    std::string vocab;
    for (const auto& t : corpus.vocab.tokens()) vocab += t + "\n";
    detail::write_text(dir / "vocab.txt", vocab);
    detail::write_text(dir / "stats.json", stats_to_json(corpus.stats).dump(2) + "\n");
}

inline Corpus read_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    const std::pair<const char*, std::vector<ExamplePair>*> splits[] = {
        {"train", &corpus.train}, {"valid", &corpus.valid}, {"test", &corpus.test}};
    for (const auto& [name, examples] : splits) {
        std::istringstream in(detail::read_text(dir / (std::string(name) + ".jsonl")));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            examples->push_back(example_from_json(nlohmann::json::parse(line)));
        }
    }
    std::vector<Token> tokens;
    std::istringstream vin(detail::read_text(dir / "vocab.txt"));
    std::string line;
    while (std::getline(vin, line)) {
        if (!line.empty()) tokens.push_back(line);
    }
    corpus.vocab = Vocabulary(tokens);
    corpus.stats = stats_from_json(nlohmann::json::parse(detail::read_text(dir / "stats.json")));
    corpus.raw_prompt_types = corpus.stats.prompt_dictionary_size;
    corpus.raw_response_types = corpus.stats.response_dictionary_size;
    return corpus;
}

}  // namespace debate_forge
