#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "debate_forge/http_server.hpp"

namespace fs = std::filesystem;
using namespace debate_forge;

namespace {

std::string read_input(const fs::path& p) { return detail::read_text(p); }

// Kialo exports are any non-.json file; the tree id is the file stem without ".kialo".
DebateTree load_tree_file(const fs::path& p) {
    const auto bytes = read_input(p);
    if (p.extension() == ".json") return load_tree(bytes, TreeFormat::CanonicalJson);
    auto stem = p.stem().string();
    if (stem.size() > 6 && stem.ends_with(".kialo")) stem.resize(stem.size() - 6);
    return load_tree(bytes, TreeFormat::KialoExport, stem);
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(in)) {
                if (e.is_regular_file()) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            out.insert(out.end(), files.begin(), files.end());
        } else {
            out.emplace_back(in);
        }
    }
    return out;
}

std::vector<DebateTree> load_trees(const std::vector<std::string>& inputs) {
    std::vector<DebateTree> trees;
    for (const auto& p : expand_inputs(inputs)) trees.push_back(load_tree_file(p));
    return trees;
}

struct StrategyArgs {
    std::string name = "multi-turn";
    std::string prompt_pattern;
    std::string response_pattern;
    std::size_t max_len = 20;
    std::string anchor = "any";

    void add_to(CLI::App* cmd) {
        cmd->add_option("--strategy", name, "supportive, contradicting, complex, multi-turn or custom")
            ->capture_default_str();
        cmd->add_option("--prompt-pattern", prompt_pattern, "prompt grammar for --strategy custom");
        cmd->add_option("--response-pattern", response_pattern, "response grammar for --strategy custom");
        cmd->add_option("--max-len", max_len, "longest path in nodes")->capture_default_str();
        cmd->add_option("--anchor", anchor, "any or root-children")
            ->check(CLI::IsMember({"any", "root-children"}))
            ->capture_default_str();
    }

    ParsingStrategy strategy() const {
        const auto n = parse_strategy_name(name);
        if (!n) throw Error("unknown strategy '" + name + "'");
        if (*n == StrategyName::Custom) {
            if (prompt_pattern.empty() || response_pattern.empty()) {
                throw Error("--strategy custom needs --prompt-pattern and --response-pattern");
            }
            return ParsingStrategy::custom(prompt_pattern, response_pattern);
        }
        return ParsingStrategy::builtin(*n);
    }

    PathLimits limits() const {
        return {max_len, anchor == "root-children" ? PathAnchor::RootChildren : PathAnchor::AnyNode};
    }
};

std::vector<DebateTranscript> read_transcripts(const fs::path& p) {
    std::vector<DebateTranscript> out;
    std::istringstream in(read_input(p));
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) out.push_back(transcript_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

void print_turn(const DebateTurn& turn) { std::cout << "[" << to_string(turn.speaker) << "] " << turn.display_text << "\n"; }

int run_ingest(const std::vector<std::string>& inputs, const fs::path& out_dir, double threshold,
               const std::string& stopwords, bool keep_all) {
    const auto words = stopwords.empty() ? default_english_stopwords() : load_stopwords(stopwords);
    fs::create_directories(out_dir);
    std::size_t kept = 0, skipped = 0;
    std::set<std::string> ids;
    for (const auto& p : expand_inputs(inputs)) {
        const auto tree = load_tree_file(p);
        if (!ids.insert(tree.tree_id).second) throw Error(p.string() + ": duplicate tree id '" + tree.tree_id + "'");
        if (!keep_all && english_score(tree, words) < threshold) {
            std::cerr << "skipping " << p.string() << ": not English\n";
            ++skipped;
            continue;
        }
        detail::write_text(out_dir / (tree.tree_id + ".json"), save_tree(tree, TreeFormat::CanonicalJson));
        ++kept;
    }
    std::cout << "ingested " << kept << " trees, skipped " << skipped << "\n";
    return 0;
}

int run_extract(const std::vector<std::string>& inputs, const StrategyArgs& sa, bool transcripts, int turns) {
    const auto strategy = sa.strategy();
    for (const auto& raw : load_trees(inputs)) {
        const auto tree = resolve_references(raw);
        for (const auto& path : enumerate_debate_paths(tree, strategy, sa.limits())) {
            if (transcripts) {
                const auto t = transcript_from_path(tree, path.node_ids);
                if (turns > 0 && t.turns.size() != static_cast<std::size_t>(turns)) continue;
                std::cout << transcript_to_json(t).dump() << "\n";
            } else {
                std::cout << nlohmann::ordered_json{{"tree_id", path.tree_id},
                                                    {"node_ids", path.node_ids},
                                                    {"split_index", path.split_index},
                                                    {"turn_starts", path.turn_starts}}
                                 .dump()
                          << "\n";
            }
        }
    }
    return 0;
}

int run_stats(const std::vector<std::string>& dirs, bool json) {
    std::vector<std::pair<std::string, CorpusStats>> cols;
    for (const auto& d : dirs) {
        const auto stats = stats_from_json(nlohmann::json::parse(read_input(fs::path(d) / "stats.json")));
        cols.emplace_back(fs::path(d).filename().string(), stats);
    }
    if (json) {
        nlohmann::ordered_json j;
        for (const auto& [name, s] : cols) j[name] = stats_to_json(s);
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << format_stats_table(cols);
    }
    return 0;
}

int run_debate(const std::string& subject, const std::string& spec, DebateConfig cfg, bool auto_play,
               const std::string& out) {
    const auto backend = make_backend(spec);
    cfg.backend = spec;
    auto t = new_debate(subject, *backend, cfg);
    print_turn(t.turns.back());
    std::string line;
    while (!t.full()) {
        if (auto_play) {
            t = advance_turn(std::move(t), *backend);
            print_turn(t.turns.back());
            continue;
        }
        std::cout << "> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        const auto cmd = std::string(trim(line));
        if (cmd.empty()) continue;
        if (cmd == "/quit") break;
        if (cmd == "/auto") {
            t = advance_turn(std::move(t), *backend);
            print_turn(t.turns.back());
            continue;
        }
        try {
            t = advance_turn(std::move(t), *backend, cmd);
        } catch (const DebateError& e) {
            std::cerr << "error: " << e.what() << "\n";
            continue;
        }
        if (!t.full()) {
            t = advance_turn(std::move(t), *backend);
            print_turn(t.turns.back());
        }
    }
    if (!out.empty()) detail::write_text(out, transcript_to_json(t).dump() + "\n");
    return 0;
}

int run_serve(const std::string& config_path, const std::string& backend, const std::string& host, int port,
              const std::string& data_dir) {
    ServiceConfig cfg = config_path.empty() ? ServiceConfig{} : parse_service_config(read_input(config_path));
    if (!host.empty()) cfg.host = host;
    if (port > 0) cfg.port = port;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!backend.empty()) {
        cfg.backends["default"] = backend;
        cfg.default_backend = "default";
    }
    if (cfg.backends.empty()) {
        cfg.backends["echo"] = "echo";
        cfg.default_backend = "echo";
    }
    DebateService service(cfg, registry_from_config(cfg));
    httplib::Server server;
    install_routes(server, service);
    std::cerr << "serving on http://" << cfg.host << ":" << cfg.port << " (" << service.store().size()
              << " debates restored)\n";
    if (!server.listen(cfg.host, cfg.port)) throw Error("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"debate-forge: argument-tree corpora, debate generation and evaluation"};
    app.require_subcommand(1);

    std::vector<std::string> inputs;
    std::string out, spec = "echo", subject, prompt;
    std::uint64_t seed = 0;
    std::size_t min_count = 10;
    int turns = 10, max_tokens = 60, order = 3;
    double temperature = 1.0, alpha = 0.4, threshold = kDefaultEnglishThreshold;
    bool flag = false, json = false;
    StrategyArgs sa;

    auto* ingest = app.add_subcommand("ingest", "validate Kialo exports or JSON trees and write canonical JSON");
    ingest->add_option("inputs", inputs, "files or directories")->required();
    ingest->add_option("-o,--out", out, "output directory")->required();
    ingest->add_option("--threshold", threshold, "minimum English stopword fraction")->capture_default_str();
    std::string stopwords;
    ingest->add_option("--stopwords", stopwords, "stopword list, one word per line");
    ingest->add_flag("--keep-all", flag, "skip the language filter");

    auto* extract = app.add_subcommand("extract", "list debate paths matching a strategy");
    extract->add_option("inputs", inputs, "tree files or directories")->required();
    sa.add_to(extract);
    extract->add_flag("--transcripts", flag, "emit human transcripts instead of paths");
    extract->add_option("--turns", turns, "with --transcripts, keep only this many turns (0 keeps all)");

    auto* corpus = app.add_subcommand("corpus", "build a train/valid/test corpus");
    corpus->add_option("inputs", inputs, "tree files or directories")->required();
    corpus->add_option("-o,--out", out, "output directory")->required();
    sa.add_to(corpus);
    corpus->add_option("--seed", seed, "split seed")->capture_default_str();
    corpus->add_option("--min-count", min_count, "vocabulary cutoff")->capture_default_str();
    corpus->add_flag("--ner", flag, "replace capitalized runs with <ent>");

    auto* stats = app.add_subcommand("stats", "print corpus statistics");
    stats->add_option("corpora", inputs, "corpus directories")->required();
    stats->add_flag("--json", json, "JSON instead of a table");

    auto* train = app.add_subcommand("train", "train an n-gram model on a corpus");
    train->add_option("corpus", subject, "corpus directory")->required();
    train->add_option("-o,--out", out, "model file")->required();
    train->add_option("--order", order, "n-gram order")->capture_default_str();
    train->add_option("--alpha", alpha, "backoff factor")->capture_default_str();

    auto* perplexity_cmd = app.add_subcommand("perplexity", "perplexity of a model on a corpus split");
    perplexity_cmd->add_option("corpus", subject, "corpus directory")->required();
    perplexity_cmd->add_option("--model", prompt, "model file")->required();
    std::string split = "test";
    perplexity_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "valid", "test"}))->capture_default_str();

    auto* generate = app.add_subcommand("generate", "generate one response");
    generate->add_option("--backend", spec, "echo, ngram:FILE, retrieval:DIR, exec:CMD or tcp:HOST:PORT")
        ->capture_default_str();
    generate->add_option("--prompt", prompt)->required();
    generate->add_option("--seed", seed)->capture_default_str();
    generate->add_option("--max-tokens", max_tokens)->capture_default_str();
    generate->add_option("--temperature", temperature)->capture_default_str();

    auto* debate = app.add_subcommand("debate", "debate interactively (/auto, /quit)");
    debate->add_option("--subject", subject)->required();
    debate->add_option("--backend", spec)->capture_default_str();
    debate->add_option("--turns", turns)->capture_default_str();
    debate->add_option("--seed", seed)->capture_default_str();
    debate->add_option("--max-tokens", max_tokens)->capture_default_str();
    debate->add_option("--temperature", temperature)->capture_default_str();
    std::string history = "full";
    debate->add_option("--history", history)->check(CLI::IsMember({"full", "last-response"}))->capture_default_str();
    debate->add_flag("--auto", flag, "let the backend play every turn");
    debate->add_option("-o,--out", out, "write the transcript JSON here");

    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    std::string config_path, host, data_dir;
    int port = 0;
    serve->add_option("--config", config_path, "service config file");
    serve->add_option("--backend", spec, "register this backend as the default");
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--data-dir", data_dir);

    auto* pack = app.add_subcommand("eval-pack", "build blinded rating packets");
    std::string human_path, generated_path;
    pack->add_option("--human", human_path, "human transcripts, one JSON per line")->required();
    pack->add_option("--generated", generated_path, "generated transcripts, one JSON per line")->required();
    pack->add_option("--turns", turns, "required transcript length")->capture_default_str();
    pack->add_option("--seed", seed)->capture_default_str();
    pack->add_option("-o,--out", out, "output directory")->required();

    auto* aggregate = app.add_subcommand("eval-aggregate", "aggregate rating CSVs");
    std::string ratings_path, key_path;
    aggregate->add_option("--ratings", ratings_path)->required();
    aggregate->add_option("--key", key_path)->required();
    aggregate->add_flag("--population", flag, "population standard deviation");
    aggregate->add_flag("--json", json);

    CLI11_PARSE(app, argc, argv);
    std::signal(SIGPIPE, SIG_IGN);

    try {
        if (*ingest) return run_ingest(inputs, out, threshold, stopwords, flag);
        if (*extract) return run_extract(inputs, sa, flag, turns);
        if (*corpus) {
            CorpusOptions opts;
            opts.seed = seed;
            opts.min_count = min_count;
            opts.limits = sa.limits();
            opts.tag_entities = flag;
            const auto c = build_corpus(load_trees(inputs), sa.strategy(), opts);
            write_corpus(c, out);
            std::cout << format_stats_table({{fs::path(out).filename().string(), c.stats}});
            return 0;
        }
        if (*stats) return run_stats(inputs, json);
        if (*train) {
            const auto c = read_corpus(subject);
            save_ngram_model(train_ngram(c, order, alpha), out);
            return 0;
        }
        if (*perplexity_cmd) {
            const auto c = read_corpus(subject);
            const auto& examples = split == "train" ? c.train : split == "valid" ? c.valid : c.test;
            std::cout << std::setprecision(6) << std::fixed << perplexity(load_ngram_model(prompt), examples) << "\n";
            return 0;
        }
        if (*generate) {
            const auto backend = make_backend(spec);
            GenerationRequest req{tokenize(prompt), max_tokens, temperature, seed};
            std::cout << display_text(backend->generate(req)) << "\n";
            return 0;
        }
        if (*debate) {
            DebateConfig cfg;
            cfg.max_turns = turns;
            cfg.seed = seed;
            cfg.max_tokens = max_tokens;
            cfg.temperature = temperature;
            cfg.history = *parse_history_mode(history);
            return run_debate(subject, spec, cfg, flag, out);
        }
        if (*serve) return run_serve(config_path, serve->count("--backend") ? spec : "", host, port, data_dir);
        if (*pack) {
            const auto human = read_transcripts(human_path);
            const auto generated = read_transcripts(generated_path);
            const auto set = make_rating_packets(human, generated, static_cast<std::size_t>(turns), seed);
            auto packets = nlohmann::ordered_json::array();
            for (const auto& p : set.packets) packets.push_back(packet_to_json(p));
            fs::create_directories(out);
            detail::write_text(fs::path(out) / "packets.json", packets.dump(2) + "\n");
            detail::write_text(fs::path(out) / "key.csv", key_to_csv(set.key));
            std::cout << set.packets.size() << " packets\n";
            return 0;
        }
        if (*aggregate) {
            const auto records = ratings_from_csv(read_input(ratings_path));
            const auto key = key_from_csv(read_input(key_path));
            const auto rep = aggregate_ratings(records, key, flag ? StdMode::Population : StdMode::Sample);
            std::cout << (json ? report_to_json(rep).dump(2) + "\n" : report_to_text(rep));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
