#include <catch_amalgamated.hpp>

#include <cmath>

#include "debate_forge/eval.hpp"
#include "support/fixture_corpus.hpp"
#include "support/oracles.hpp"

using namespace debate_forge;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<ExamplePair> pairs_with_lengths(std::initializer_list<std::size_t> lengths) {
    std::vector<ExamplePair> out;
    for (auto n : lengths) {
        ExamplePair ex;
        ex.prompt = {"p"};
        ex.response = Tokens(n, "r");
        out.push_back(ex);
    }
    return out;
}

DebateTranscript transcript(const std::string& id, std::size_t turns, Speaker second = Speaker::Bob) {
    DebateTranscript t;
    t.debate_id = id;
    t.subject = "Subject " + id;
    t.config.max_turns = static_cast<int>(turns);
    for (std::size_t i = 0; i < turns; ++i) {
        const auto speaker = i % 2 == 0 ? Speaker::Alice : second;
        t.turns.push_back(make_turn(speaker, {"turn", std::to_string(i), "<unk>"}));
    }
    return t;
}

std::set<std::string> keys_of(const nlohmann::ordered_json& j) {
    std::set<std::string> out;
    for (const auto& [k, _] : j.items()) out.insert(k);
    return out;
}

RatingRecord rec(std::string packet, std::string rater, std::array<int, 4> scores) {
    return {std::move(packet), std::move(rater), scores};
}

}  // namespace

TEST_CASE("perplexity of analytic scorers", "[eval]") {
    const auto examples = pairs_with_lengths({3, 1, 6});
    const auto uniform = [](const Tokens& r, const Tokens&) { return static_cast<double>(r.size()) * std::log(1.0 / 50); };
    CHECK_THAT(perplexity(uniform, examples), WithinAbs(50.0, 1e-9));

    const auto certain = [](const Tokens&, const Tokens&) { return 0.0; };
    CHECK(perplexity(certain, examples) == 1.0);

    const auto two = pairs_with_lengths({2});
    const auto halves = [](const Tokens&, const Tokens&) { return std::log(0.5) + std::log(0.125); };
    CHECK_THAT(perplexity(halves, two), WithinAbs(4.0, 1e-9));

    CHECK_THROWS_AS(perplexity(certain, std::vector<ExamplePair>{}), EvalError);
}

TEST_CASE("n-gram perplexity matches the per-token oracle", "[eval]") {
    for (auto strategy : builtin_strategies()) {
        const auto corpus = testing_support::fixture_corpus(strategy);
        const auto model = train_ngram(corpus, 3);
        std::vector<double> probs;
        for (const auto& ex : corpus.train) {
            Tokens history = ex.prompt;
            history.push_back("<turn>");
            for (const auto& t : ex.response) {
                probs.push_back(model.prob(history, t));
                history.push_back(t);
            }
        }
        const double ppl = perplexity(model, corpus.train);
        CHECK_THAT(ppl, WithinRel(oracle::perplexity(probs), 1e-9));
        CHECK(ppl <= static_cast<double>(model.vocab_size()));
    }
}

TEST_CASE("perplexity report", "[eval]") {
    PerplexityReport rep;
    rep.add({"ngram-3", "multi-turn", false, 12.5});
    rep.add({"ngram-3", "multi-turn", true, 11.25});
    CHECK_THROWS_AS(rep.add({"ngram-3", "multi-turn", false, 1.0}), EvalError);
    CHECK(rep.to_json().size() == 2);
    CHECK(rep.to_text().find("11.25") != std::string::npos);
}

TEST_CASE("rating packets are shuffled and blinded", "[eval]") {
    std::vector<DebateTranscript> human, generated;
    for (int i = 0; i < 50; ++i) human.push_back(transcript("h" + std::to_string(i), 10, Speaker::Human));
    for (int i = 0; i < 56; ++i) generated.push_back(transcript("g" + std::to_string(i), 10));

    const auto set = make_rating_packets(human, generated, 10, 7);
    REQUIRE(set.packets.size() == 106);
    REQUIRE(set.key.size() == 106);
    std::size_t h = 0;
    for (const auto& [_, s] : set.key) h += s == Source::Human;
    CHECK(h == 50);

    const auto again = make_rating_packets(human, generated, 10, 7);
    const auto other = make_rating_packets(human, generated, 10, 8);
    std::vector<std::string> a, b, c;
    for (std::size_t i = 0; i < 106; ++i) {
        a.push_back(set.packets[i].subject);
        b.push_back(again.packets[i].subject);
        c.push_back(other.packets[i].subject);
    }
    CHECK(a == b);
    CHECK(a != c);

    // Every packet has the same shape, and nothing in it names its origin.
    const auto schema = keys_of(packet_to_json(set.packets.front()));
    for (const auto& p : set.packets) {
        const auto j = packet_to_json(p);
        CHECK(keys_of(j) == schema);
        CHECK(j["criteria"] == nlohmann::json{"style", "content", "strategy", "overall"});
        for (const auto& t : j["turns"]) {
            CHECK(keys_of(t) == std::set<std::string>{"speaker", "text"});
            CHECK((t["speaker"] == "Alice" || t["speaker"] == "Bob"));
        }
        const auto dump = j.dump();
        CHECK(dump.find("human") == std::string::npos);
        CHECK(dump.find("generated") == std::string::npos);
        CHECK(set.key.count(p.packet_id) == 1);
    }

    const auto one = make_rating_packets({}, std::vector{transcript("g", 10)}, 10, 1);
    REQUIRE(one.packets.size() == 1);
    CHECK(one.key.begin()->second == Source::Generated);

    CHECK_THROWS_AS(make_rating_packets(human, std::vector{transcript("short", 9)}, 10, 1), EvalError);
}

TEST_CASE("key CSV round trip", "[eval]") {
    const PacketKey key{{"packet-0001", Source::Human}, {"packet-0002", Source::Generated}};
    CHECK(key_from_csv(key_to_csv(key)) == key);
    CHECK_THROWS_AS(key_from_csv("packet_id,source\nx,robot\n"), EvalError);
    CHECK_THROWS_AS(key_from_csv("id,src\n"), EvalError);
}

TEST_CASE("two ratings give the hand-computed spread", "[eval]") {
    const PacketKey key{{"p", Source::Human}};
    const std::vector<RatingRecord> records{rec("p", "a", {3, 3, 3, 3}), rec("p", "b", {4, 4, 4, 4})};
    const auto rep = aggregate_ratings(records, key);
    const auto& style = rep.stats.at(Source::Human)[0];
    CHECK_THAT(style.mean, WithinAbs(3.5, 1e-4));
    CHECK_THAT(style.std, WithinAbs(0.7071, 1e-4));
    CHECK_FALSE(style.degenerate);
    CHECK(report_to_text(rep).find("3.500 ± 0.707") != std::string::npos);

    const auto pop = aggregate_ratings(records, key, StdMode::Population);
    CHECK_THAT(pop.stats.at(Source::Human)[0].std, WithinAbs(0.5, 1e-12));
}

TEST_CASE("a single rating reports zero spread with a flag", "[eval]") {
    const PacketKey key{{"p", Source::Generated}};
    const auto rep = aggregate_ratings(std::vector{rec("p", "a", {4, 4, 4, 4})}, key);
    const auto& s = rep.stats.at(Source::Generated)[3];
    CHECK(s.mean == 4.0);
    CHECK(s.std == 0.0);
    CHECK(s.degenerate);
    CHECK(rep.stats.at(Source::Human)[0].n == 0);
    CHECK(report_to_json(rep)["sources"]["human"]["style"]["mean"].is_null());
}

TEST_CASE("fixture ratings aggregate to hand-computed values", "[eval]") {
    const auto records = ratings_from_csv(testing_support::read_file(testing_support::fixture_path("ratings.csv")));
    const auto key = key_from_csv(testing_support::read_file(testing_support::fixture_path("ratings_key.csv")));
    REQUIRE(records.size() == 9);
    const auto rep = aggregate_ratings(records, key);
    CHECK(rep.input == 9);
    CHECK(rep.accepted == 6);
    CHECK(rep.rejected == 2);
    CHECK(rep.superseded == 1);
    CHECK(rep.accepted + rep.rejected + rep.superseded == rep.input);

    // Accepted rows, listed by hand from the CSV: p2/r1 is its second row,
    // p4/r2 is out of range and p4/r3 unparsable.
    const std::array<std::vector<double>, 4> human{{{3, 4, 3}, {4, 3, 4}, {2, 3, 3}, {3, 4, 3}}};
    const std::array<std::vector<double>, 4> generated{{{2, 3, 1}, {3, 2, 2}, {1, 2, 2}, {2, 2, 1}}};
    const std::array<std::pair<double, double>, 4> human_hand{{{3.3333, 0.5774}, {3.6667, 0.5774},
                                                                {2.6667, 0.5774}, {3.3333, 0.5774}}};
    const std::array<std::pair<double, double>, 4> generated_hand{{{2.0, 1.0}, {2.3333, 0.5774},
                                                                    {1.6667, 0.5774}, {1.6667, 0.5774}}};
    for (std::size_t c = 0; c < 4; ++c) {
        const auto& hs = rep.stats.at(Source::Human)[c];
        const auto& gs = rep.stats.at(Source::Generated)[c];
        CHECK_THAT(hs.mean, WithinAbs(human_hand[c].first, 1e-4));
        CHECK_THAT(hs.std, WithinAbs(human_hand[c].second, 1e-4));
        CHECK_THAT(gs.mean, WithinAbs(generated_hand[c].first, 1e-4));
        CHECK_THAT(gs.std, WithinAbs(generated_hand[c].second, 1e-4));
        const auto [hm, hsd] = oracle::mean_sample_std(human[c]);
        const auto [gm, gsd] = oracle::mean_sample_std(generated[c]);
        CHECK_THAT(hs.mean, WithinAbs(hm, 1e-12));
        CHECK_THAT(hs.std, WithinAbs(hsd, 1e-12));
        CHECK_THAT(gs.mean, WithinAbs(gm, 1e-12));
        CHECK_THAT(gs.std, WithinAbs(gsd, 1e-12));
        CHECK(hs.mean >= 1.0);
        CHECK(hs.mean <= 4.0);
    }

    const auto text = report_to_text(rep);
    CHECK(text.find("criterion") == 0);
    CHECK(text.find("style      3.333 ± 0.577    2.000 ± 1.000") != std::string::npos);
    const auto j = report_to_json(rep);
    CHECK(j["sources"]["generated"]["style"]["std"] == 1.0);
    CHECK(j["rejected"] == 2);
}

TEST_CASE("aggregation ignores record order", "[eval]") {
    auto records = ratings_from_csv(testing_support::read_file(testing_support::fixture_path("ratings.csv")));
    const auto key = key_from_csv(testing_support::read_file(testing_support::fixture_path("ratings_key.csv")));
    // Duplicates resolve by position, so keep the two p2/r1 rows in order.
    records.erase(records.begin() + 2);
    const auto expected = report_to_json(aggregate_ratings(records, key)).dump();
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        rng.shuffle(records);
        CHECK(report_to_json(aggregate_ratings(records, key)).dump() == expected);
    }
}

TEST_CASE("ratings against an unknown packet", "[eval]") {
    const PacketKey key{{"p", Source::Human}};
    CHECK_THROWS_AS(aggregate_ratings(std::vector{rec("q", "a", {1, 1, 1, 1})}, key), EvalError);
}

TEST_CASE("ratings CSV parsing", "[eval]") {
    const auto rows = ratings_from_csv("packet_id,rater_id,style,content,strategy,overall\r\n\np,a,1,2,3,4\r\n");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == rec("p", "a", {1, 2, 3, 4}));
    CHECK(rating_to_csv_row(rows[0]) == "p,a,1,2,3,4\n");
    CHECK_THROWS_AS(ratings_from_csv("packet_id,rater_id,style,content,strategy,overall\np,a,1,2\n"), EvalError);
    CHECK_THROWS_AS(ratings_from_csv(""), EvalError);
    const auto odd = ratings_from_csv("packet_id,rater_id,style,content,strategy,overall\np,a,-1,2.5,,4\n");
    CHECK_FALSE(odd[0].in_range());
}
