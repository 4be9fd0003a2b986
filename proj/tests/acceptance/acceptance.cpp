// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "debate_forge/backends.hpp"
#include "debate_forge/eval.hpp"
#include "debate_forge/tree_io.hpp"
#include "support/fixture_corpus.hpp"
#include "support/oracles.hpp"
#include "support/random_trees.hpp"

using namespace debate_forge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failures; the first few are kept for the report line.
class Tally {
public:
    void check(bool ok, const std::string& what) {
        if (ok) return;
        ++failures_;
        if (notes_.size() < 3) notes_.push_back(what);
    }
    std::size_t failures() const { return failures_; }
    Outcome outcome(std::string detail) const {
        if (failures_ == 0) return {true, std::move(detail)};
        std::string msg = std::to_string(failures_) + " violation(s)";
        for (const auto& n : notes_) msg += "; " + n;
        return {false, msg + "; " + detail};
    }

private:
    std::size_t failures_ = 0;
    std::vector<std::string> notes_;
};

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(double x, int precision = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << x;
    return s.str();
}

const char* prompt_src(StrategyName n) {
    return n == StrategyName::MultiTurn ? "[Pro|Con][Pro]*([Con][Pro]*)*" : "[Pro|Con][Pro]*";
}

const char* response_src(StrategyName n) {
    switch (n) {
        case StrategyName::Supportive: return "[Pro]+";
        case StrategyName::Complex: return "[Pro|Con][Pro]*";
        default: return "[Con][Pro]*";
    }
}

using PathSet = std::set<oracle::PathKey>;

PathSet keys(const std::vector<DebatePath>& paths) {
    PathSet out;
    for (const auto& p : paths) out.insert({p.node_ids, p.split_index});
    return out;
}

std::vector<DebateTree> random_trees(std::uint64_t first, std::size_t count, std::size_t max_nodes) {
    std::vector<DebateTree> out;
    for (std::uint64_t s = first; s < first + count; ++s) out.push_back(testing_support::random_tree(s, max_nodes));
    return out;
}

// ---- criteria ----------------------------------------------------------------

Outcome grammar_oracle() {
    const auto start = Clock::now();
    Tally tally;
    std::size_t checked = 0;
    std::set<std::string> sources;
    for (auto n : builtin_strategies()) {
        sources.insert(prompt_src(n));
        sources.insert(response_src(n));
    }
    for (const auto& src : sources) {
        const auto p = compile_stance_pattern(src);
        const oracle::RegexPattern reference(src);
        for (std::size_t len = 0; len <= 10; ++len) {
            for (unsigned bits = 0; bits < (1u << len); ++bits) {
                const auto seq = oracle::sequence_from_bits(bits, len);
                tally.check(pattern_matches(p, seq) == reference(seq), src + " on " + oracle::letters(seq));
                ++checked;
            }
        }
    }
    // The strategies must bind exactly these grammars.
    for (auto n : builtin_strategies()) {
        const auto s = ParsingStrategy::builtin(n);
        const oracle::RegexPattern prompt(prompt_src(n)), response(response_src(n));
        for (std::size_t len = 0; len <= 10; ++len) {
            for (unsigned bits = 0; bits < (1u << len); ++bits) {
                const auto seq = oracle::sequence_from_bits(bits, len);
                tally.check(pattern_matches(s.prompt, seq) == prompt(seq), "prompt binding");
                tally.check(pattern_matches(s.response, seq) == response(seq), "response binding");
            }
        }
    }
    const double secs = seconds_since(start);
    tally.check(sources.size() == 4, "expected 4 distinct patterns");
    tally.check(secs < 5.0, "took " + fmt(secs) + " s");
    return tally.outcome(std::to_string(sources.size()) + " patterns, " + std::to_string(checked) +
                         " sequences, 0 mismatches, " + fmt(secs) + " s < 5 s");
}

Outcome path_oracle() {
    const auto start = Clock::now();
    Tally tally;
    auto trees = random_trees(1, 200, 50);
    trees.push_back(testing_support::f1());
    std::size_t paths = 0;
    for (const auto& tree : trees) {
        for (auto name : builtin_strategies()) {
            for (auto anchor : {PathAnchor::AnyNode, PathAnchor::RootChildren}) {
                const PathLimits limits{20, anchor};
                const auto got = enumerate_debate_paths(tree, ParsingStrategy::builtin(name), limits);
                const auto expected = oracle::brute_force_paths(tree, prompt_src(name), response_src(name), 20,
                                                                anchor == PathAnchor::RootChildren);
                tally.check(keys(got) == expected && got.size() == expected.size(),
                            tree.tree_id + "/" + std::string(to_string(name)));
                paths += got.size();
            }
        }
    }
    const auto f1 = testing_support::f1();
    const std::pair<StrategyName, std::size_t> counts[] = {{StrategyName::Supportive, 2},
                                                           {StrategyName::Contradicting, 4},
                                                           {StrategyName::Complex, 6},
                                                           {StrategyName::MultiTurn, 5}};
    std::string f1_counts;
    for (const auto& [name, want] : counts) {
        const auto got = enumerate_debate_paths(f1, ParsingStrategy::builtin(name)).size();
        tally.check(got == want, "F1 " + std::string(to_string(name)) + " = " + std::to_string(got));
        f1_counts += (f1_counts.empty() ? "" : "/") + std::to_string(got);
    }
    const double secs = seconds_since(start);
    tally.check(secs < 30.0, "took " + fmt(secs) + " s");
    return tally.outcome("201 trees, " + std::to_string(paths) + " paths agree; F1 " + f1_counts + " (2/4/6/5); " +
                         fmt(secs) + " s < 30 s");
}

Outcome union_subset_laws() {
    Tally tally;
    auto trees = random_trees(1000, 200, 50);
    for (auto& t : testing_support::fixture_trees()) trees.push_back(resolve_references(t));
    std::size_t complex_total = 0;
    for (const auto& tree : trees) {
        const auto run = [&](StrategyName n) { return keys(enumerate_debate_paths(tree, ParsingStrategy::builtin(n))); };
        const auto supportive = run(StrategyName::Supportive);
        const auto contradicting = run(StrategyName::Contradicting);
        const auto complex = run(StrategyName::Complex);
        const auto multi = run(StrategyName::MultiTurn);
        PathSet both;
        std::set_intersection(supportive.begin(), supportive.end(), contradicting.begin(), contradicting.end(),
                              std::inserter(both, both.end()));
        PathSet either = supportive;
        either.insert(contradicting.begin(), contradicting.end());
        tally.check(both.empty(), tree.tree_id + ": supportive and contradicting overlap");
        tally.check(either == complex, tree.tree_id + ": complex is not the union");
        tally.check(std::includes(multi.begin(), multi.end(), contradicting.begin(), contradicting.end()),
                    tree.tree_id + ": contradicting not inside multi-turn");
        complex_total += complex.size();
    }
    return tally.outcome(std::to_string(trees.size()) + " trees, " + std::to_string(complex_total) +
                         " complex pairs, 0 violations");
}

Outcome round_trips() {
    Tally tally;
    std::size_t n = 0;
    for (const auto& stem : {"religion", "remote_work", "f1"}) {
        const auto text = testing_support::read_file(testing_support::fixture_path(std::string(stem) + ".kialo.txt"));
        const auto t = load_tree(text, TreeFormat::KialoExport, stem);
        tally.check(load_tree(save_tree(t, TreeFormat::KialoExport), TreeFormat::KialoExport, stem) == t,
                    std::string(stem) + " Kialo");
        tally.check(load_tree(save_tree(t, TreeFormat::CanonicalJson), TreeFormat::CanonicalJson) == t,
                    std::string(stem) + " JSON");
        ++n;
    }
    const auto f1 = testing_support::f1();
    tally.check(load_tree(save_tree(f1, TreeFormat::CanonicalJson), TreeFormat::CanonicalJson) == f1, "f1.json JSON");
    // Free-form ids are renumbered on Kialo save, so the text is the fixed point.
    const auto f1_text = save_tree(f1, TreeFormat::KialoExport);
    tally.check(save_tree(load_tree(f1_text, TreeFormat::KialoExport, "F1"), TreeFormat::KialoExport) == f1_text,
                "f1.json Kialo text");
    ++n;
    for (const auto& t : random_trees(1, 100, 100)) {
        tally.check(load_tree(save_tree(t, TreeFormat::KialoExport), TreeFormat::KialoExport, t.tree_id) == t,
                    t.tree_id + " Kialo");
        tally.check(load_tree(save_tree(t, TreeFormat::CanonicalJson), TreeFormat::CanonicalJson) == t,
                    t.tree_id + " JSON");
        ++n;
    }
    return tally.outcome(std::to_string(n) + " trees round-trip in both formats");
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = detail::read_text(e.path());
    return out;
}

Outcome corpus_invariants() {
    Tally tally;
    auto trees = random_trees(1, 40, 30);
    for (const auto& t : testing_support::fixture_trees()) trees.push_back(t);
    CorpusOptions opts;
    opts.min_count = 2;
    opts.seed = 11;
    opts.ratios = {0.6, 0.2, 0.2};
    const auto scratch = fs::temp_directory_path() / ("debate_forge_acceptance_" + std::to_string(::getpid()));
    std::size_t examples = 0;
    for (auto name : builtin_strategies()) {
        const auto strategy = ParsingStrategy::builtin(name);
        const auto c = build_corpus(trees, strategy, opts);
        std::map<std::string, int> split_of;
        int split_no = 0;
        for (const auto* split : {&c.train, &c.valid, &c.test}) {
            for (const auto& e : *split) {
                const auto [it, fresh] = split_of.emplace(e.tree_id, split_no);
                tally.check(fresh || it->second == split_no, "tree " + e.tree_id + " in two splits");
                for (const auto* side : {&e.prompt, &e.response}) {
                    for (const auto& t : *side) tally.check(c.vocab.contains(t), "OOV token '" + t + "'");
                }
                ++examples;
            }
            ++split_no;
        }
        const auto a = scratch / "a", b = scratch / "b";
        fs::remove_all(scratch);
        write_corpus(c, a);
        auto reversed = trees;
        std::reverse(reversed.begin(), reversed.end());
        write_corpus(build_corpus(reversed, strategy, opts), b);
        tally.check(directory_bytes(a) == directory_bytes(b), std::string(to_string(name)) + " rebuild differs");
    }
    fs::remove_all(scratch);
    return tally.outcome(std::to_string(examples) + " examples over 4 strategies: no OOV, disjoint splits, "
                         "byte-identical rebuild");
}

Outcome perplexity_sanity() {
    Tally tally;
    std::vector<ExamplePair> examples(3);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        examples[i].prompt = {"p"};
        examples[i].response = Tokens(2 * i + 1, "r");
    }
    const auto uniform = [](const Tokens& r, const Tokens&) { return static_cast<double>(r.size()) * std::log(1.0 / 50); };
    const double u = perplexity(uniform, examples);
    tally.check(std::abs(u - 50.0) < 1e-9, "uniform gives " + fmt(u, 12));

    std::vector<ExamplePair> two(1);
    two[0].response = {"a", "b"};
    const auto analytic = [](const Tokens&, const Tokens&) { return std::log(0.5) + std::log(0.125); };
    const double four = perplexity(analytic, two);
    tally.check(std::abs(four - 4.0) < 1e-9, "two-token case gives " + fmt(four, 12));

    double worst = 0.0;
    std::size_t vocab = 0;
    for (auto strategy : builtin_strategies()) {
        const auto corpus = testing_support::fixture_corpus(strategy);
        const auto model = train_ngram(corpus);
        std::vector<double> probs;
        for (const auto& ex : corpus.train) {
            Tokens s = ex.prompt;
            s.push_back(special::kTurn);
            s.insert(s.end(), ex.response.begin(), ex.response.end());
            const double ppl = std::exp(-ngram_score(model, s) / static_cast<double>(s.size()));
            tally.check(ppl <= static_cast<double>(model.vocab_size()), "memorized stream above |V|");
            worst = std::max(worst, ppl);
        }
        vocab = model.vocab_size();
    }
    return tally.outcome("uniform " + fmt(u, 12) + ", analytic " + fmt(four, 12) + ", worst memorized " +
                         fmt(worst) + " <= |V| (" + std::to_string(vocab) + ")");
}

// Keeps every prompt sent to the wrapped backend.
class Recording : public GeneratorBackend {
public:
    explicit Recording(GeneratorBackend& inner) : inner_(inner) {}
    Tokens generate(const GenerationRequest& req) override {
        prompts.push_back(req.prompt);
        return inner_.generate(req);
    }
    std::string describe() const override { return inner_.describe(); }
    bool deterministic() const override { return inner_.deterministic(); }

    std::vector<Tokens> prompts;

private:
    GeneratorBackend& inner_;
};

Outcome multi_turn_protocol() {
    Tally tally;
    const auto corpus = testing_support::fixture_corpus(StrategyName::MultiTurn);
    RetrievalBackend retrieval(std::make_shared<const RetrievalIndex>(build_retrieval_index(corpus)));
    Recording rec(retrieval);
    const std::string subject = "Religion does more harm than good.";
    const auto a = run_debate(subject, rec, 10, 1);
    const auto b = run_debate(subject, retrieval, 10, 1);
    tally.check(retrieval.deterministic(), "retrieval backend is not deterministic");
    tally.check(a == b, "rerun differs");
    tally.check(a.turns.size() == 10, std::to_string(a.turns.size()) + " turns");
    for (std::size_t i = 0; i < a.turns.size(); ++i) {
        tally.check(a.turns[i].speaker == (i % 2 == 0 ? Speaker::Alice : Speaker::Bob), "speaker order");
    }
    tally.check(rec.prompts.size() == 10, "backend calls");
    std::size_t longest = 0;
    for (std::size_t k = 0; k < rec.prompts.size(); ++k) {
        const auto& p = rec.prompts[k];
        const auto seps = static_cast<std::size_t>(std::count(p.begin(), p.end(), special::kTurn));
        tally.check(seps == k, "turn " + std::to_string(k + 1) + " prompt has " + std::to_string(seps) + " separators");
        tally.check(p.size() <= 512, "prompt over 512 tokens");
        longest = std::max(longest, p.size());
    }
    return tally.outcome("10 alternating turns, reproducible; turn k prompt has k-1 separators; longest prompt " +
                         std::to_string(longest) + " <= 512 tokens");
}

BackendError::Kind error_kind(GeneratorBackend& b, const GenerationRequest& req, bool& threw) {
    threw = false;
    try {
        b.generate(req);
    } catch (const BackendError& e) {
        threw = true;
        return e.kind();
    }
    return BackendError::Kind::Unavailable;
}

Outcome wire_protocol() {
    Tally tally;
    const std::string exec = std::string("exec:") + DEBATE_FORGE_ECHO_BACKEND;
    ExternalBackend echo(parse_endpoint(exec));
    std::size_t errors = 0;
    const auto start = Clock::now();
    for (int i = 0; i < 1000; ++i) {
        GenerationRequest req;
        req.prompt = {"req", std::to_string(i), "<turn>", "x"};
        req.seed = static_cast<std::uint64_t>(i);
        try {
            const auto reply = echo.generate(req);
            if (reply != Tokens{"req", std::to_string(i), "<turn>", "x", "<eos>"}) ++errors;
        } catch (const BackendError&) {
            ++errors;
        }
    }
    const double secs = seconds_since(start);
    tally.check(errors == 0, std::to_string(errors) + " errors in 1000 requests");

    GenerationRequest req;
    req.prompt = {"a"};
    bool threw = false;
    const auto short_timeout = std::chrono::milliseconds(300);
    ExternalBackend silent(parse_endpoint(exec + " --mode silent"), short_timeout);
    const auto timeout_start = Clock::now();
    const auto k1 = error_kind(silent, req, threw);
    const double waited = seconds_since(timeout_start);
    tally.check(threw && k1 == BackendError::Kind::Timeout, "silent backend did not time out");
    tally.check(waited < 2.0, "timeout took " + fmt(waited) + " s");

    ExternalBackend wrong(parse_endpoint(exec + " --mode wrong-id"), short_timeout);
    const auto k2 = error_kind(wrong, req, threw);
    tally.check(threw && k2 == BackendError::Kind::ProtocolError, "id mismatch not reported");
    return tally.outcome("1000 requests, " + std::to_string(errors) + " errors, " + fmt(secs) +
                         " s; timeout -> Timeout after " + fmt(waited) + " s; id mismatch -> ProtocolError");
}

Outcome rating_aggregation() {
    Tally tally;
    const auto records = ratings_from_csv(testing_support::read_file(testing_support::fixture_path("ratings.csv")));
    const auto key = key_from_csv(testing_support::read_file(testing_support::fixture_path("ratings_key.csv")));
    const auto rep = aggregate_ratings(records, key);
    // Worked by hand from the fixture rows.
    const std::array<std::pair<double, double>, 4> human{{{10.0 / 3, 0.57735}, {11.0 / 3, 0.57735},
                                                          {8.0 / 3, 0.57735}, {10.0 / 3, 0.57735}}};
    const std::array<std::pair<double, double>, 4> generated{{{2.0, 1.0}, {7.0 / 3, 0.57735},
                                                              {5.0 / 3, 0.57735}, {5.0 / 3, 0.57735}}};
    for (std::size_t c = 0; c < 4; ++c) {
        const auto& h = rep.stats.at(Source::Human)[c];
        const auto& g = rep.stats.at(Source::Generated)[c];
        const auto& name = rating_criteria()[c];
        tally.check(std::abs(h.mean - human[c].first) < 1e-4 && std::abs(h.std - human[c].second) < 1e-4,
                    "human " + name);
        tally.check(std::abs(g.mean - generated[c].first) < 1e-4 && std::abs(g.std - generated[c].second) < 1e-4,
                    "generated " + name);
    }
    tally.check(rep.accepted == 6 && rep.rejected == 2 && rep.superseded == 1, "record counts");
    tally.check(rep.accepted + rep.rejected + rep.superseded == rep.input, "records not counted once");

    // Table-shaped text: a header and one "mean ± std" row per criterion.
    const auto text = report_to_text(rep);
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    tally.check(line.find("criterion") == 0 && line.find("human") != std::string::npos &&
                    line.find("generated") != std::string::npos,
                "report header");
    for (const auto& name : rating_criteria()) {
        std::getline(lines, line);
        std::size_t pm = 0;
        for (auto pos = line.find("±"); pos != std::string::npos; pos = line.find("±", pos + 1)) ++pm;
        tally.check(line.rfind(name, 0) == 0 && pm == 2, "report row '" + line + "'");
    }

    std::vector<DebateTranscript> h(50), g(56);
    for (std::size_t i = 0; i < h.size() + g.size(); ++i) {
        auto& t = i < h.size() ? h[i] : g[i - h.size()];
        t.debate_id = "d" + std::to_string(i);
        t.subject = "Subject " + std::to_string(i);
        t.config.max_turns = 10;
        for (std::size_t k = 0; k < 10; ++k) {
            const auto speaker = i < h.size() ? Speaker::Human : agent_for_turn(k);
            t.turns.push_back(make_turn(k % 2 == 0 ? Speaker::Alice : speaker, {"turn", std::to_string(k)}));
        }
    }
    const auto set = make_rating_packets(h, g, 10, 2024);
    std::size_t humans = 0;
    for (const auto& [_, s] : set.key) humans += s == Source::Human;
    tally.check(set.packets.size() == 106 && set.key.size() == 106, "packet count");
    tally.check(humans == 50, "key sources");
    for (const auto& p : set.packets) {
        const auto dump = packet_to_json(p).dump();
        tally.check(dump.find("human") == std::string::npos && dump.find("Human") == std::string::npos &&
                        dump.find("generated") == std::string::npos,
                    p.packet_id + " leaks its source");
    }
    return tally.outcome("hand values within 1e-4; report rows style..overall; " +
                         std::to_string(set.packets.size()) + " blinded packets (50+56)");
}

Outcome latency() {
    Tally tally;
    const auto corpus = testing_support::fixture_corpus(StrategyName::MultiTurn);
    NgramBackend ngram(std::make_shared<const NgramModel>(train_ngram(corpus)));
    RetrievalBackend retrieval(std::make_shared<const RetrievalIndex>(build_retrieval_index(corpus)));
    std::string detail;
    for (const auto& [label, backend] :
         {std::pair<std::string, GeneratorBackend*>{"ngram", &ngram}, {"retrieval", &retrieval}}) {
        double worst = 0.0, total = 0.0;
        int turns = 0;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            DebateConfig cfg;
            cfg.max_turns = 15;
            cfg.seed = seed;
            auto start = Clock::now();
            auto t = new_debate("Remote work is better than working in an office.", *backend, cfg);
            double ms = seconds_since(start) * 1000;
            for (;;) {
                worst = std::max(worst, ms);
                total += ms;
                ++turns;
                if (t.full()) break;
                start = Clock::now();
                t = advance_turn(std::move(t), *backend);
                ms = seconds_since(start) * 1000;
            }
        }
        tally.check(worst < 100.0, label + " turn took " + fmt(worst) + " ms");
        detail += (detail.empty() ? "" : "; ") + label + " worst " + fmt(worst) + " ms, mean " +
                  fmt(total / turns) + " ms over " + std::to_string(turns) + " turns";
    }
    return tally.outcome(detail + " (< 100 ms)");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"grammar-oracle", grammar_oracle},
        {"path-enumeration-oracle", path_oracle},
        {"union-subset-laws", union_subset_laws},
        {"round-trip", round_trips},
        {"corpus-invariants", corpus_invariants},
        {"perplexity-sanity", perplexity_sanity},
        {"multi-turn-protocol", multi_turn_protocol},
        {"backend-wire-protocol", wire_protocol},
        {"rating-aggregation", rating_aggregation},
        {"latency", latency},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(24) << name << "  " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
