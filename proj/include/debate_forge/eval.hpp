#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "debate_forge/corpus.hpp"
#include "debate_forge/error.hpp"
#include "debate_forge/ngram.hpp"
#include "debate_forge/orchestrator.hpp"
#include "debate_forge/random.hpp"

namespace debate_forge {

// ---- perplexity ------------------------------------------------------------

// Anything returning the total natural-log probability of a response given
// its prompt.
template <class S>
concept ResponseScorer = requires(const S& s, const Tokens& response, const Tokens& prompt) {
    { s(response, prompt) } -> std::convertible_to<double>;
};

// exp(-sum of response log-probs / number of response tokens). Responses are
// scored with the prompt as context; every response token counts, <eos>
// included.
template <ResponseScorer S>
double perplexity(const S& scorer, std::span<const ExamplePair> examples) {
    double log_prob = 0.0;
    std::size_t tokens = 0;
    for (const auto& ex : examples) {
        log_prob += scorer(ex.response, ex.prompt);
        tokens += ex.response.size();
    }
    if (tokens == 0) throw EvalError(EvalError::Kind::EmptySet, "no response tokens to score");
    return std::exp(-log_prob / static_cast<double>(tokens));
}

inline double perplexity(const NgramModel& model, std::span<const ExamplePair> examples) {
    return perplexity(
        [&model](const Tokens& response, const Tokens& prompt) {
            return ngram_score(model, response, ngram_context(model, prompt));
        },
        examples);
}

struct PerplexityRow {
    std::string model;
    std::string strategy;
    bool ner = false;
    double perplexity = 0.0;
};

class PerplexityReport {
public:
    void add(PerplexityRow row) {
        for (const auto& r : rows_) {
            if (r.model == row.model && r.strategy == row.strategy && r.ner == row.ner) {
                throw EvalError(EvalError::Kind::Format,
                                "duplicate perplexity row " + row.model + "/" + row.strategy);
            }
        }
        rows_.push_back(std::move(row));
    }
    const std::vector<PerplexityRow>& rows() const { return rows_; }

    nlohmann::ordered_json to_json() const {
        auto out = nlohmann::ordered_json::array();
        for (const auto& r : rows_) {
            out.push_back(
                {{"model", r.model}, {"strategy", r.strategy}, {"ner", r.ner}, {"perplexity", r.perplexity}});
        }
        return out;
    }

    std::string to_text() const {
        std::size_t wm = 5, ws = 8;
        for (const auto& r : rows_) {
            wm = std::max(wm, r.model.size());
            ws = std::max(ws, r.strategy.size());
        }
        std::ostringstream os;
        os << std::left << std::setw(static_cast<int>(wm)) << "model" << "  " << std::setw(static_cast<int>(ws))
           << "strategy" << "  " << std::setw(3) << "ner" << "  " << std::right << std::setw(10) << "perplexity"
           << '\n';
        for (const auto& r : rows_) {
            os << std::left << std::setw(static_cast<int>(wm)) << r.model << "  " << std::setw(static_cast<int>(ws))
               << r.strategy << "  " << std::setw(3) << (r.ner ? "yes" : "no") << "  " << std::right
               << std::setw(10) << std::fixed << std::setprecision(2) << r.perplexity << '\n';
        }
        return os.str();
    }

private:
    std::vector<PerplexityRow> rows_;
};

// ---- rating packets --------------------------------------------------------

enum class Source { Human, Generated };

inline const char* to_string(Source s) { return s == Source::Human ? "human" : "generated"; }

inline std::optional<Source> parse_source(std::string_view s) {
    if (s == "human") return Source::Human;
    if (s == "generated") return Source::Generated;
    return std::nullopt;
}

inline const std::array<std::string, 4>& rating_criteria() {
    static const std::array<std::string, 4> c{"style", "content", "strategy", "overall"};
    return c;
}

struct PacketTurn {
    std::string speaker;
    std::string text;
};

// What a rater sees. Nothing in here depends on where the debate came from.
struct RatingPacket {
    std::string packet_id;
    std::string subject;
    std::vector<PacketTurn> turns;
};

using PacketKey = std::map<std::string, Source>;

struct PacketSet {
    std::vector<RatingPacket> packets;
    PacketKey key;
};

inline RatingPacket blind(const DebateTranscript& t) {
    RatingPacket p;
    p.subject = t.subject;
    for (std::size_t i = 0; i < t.turns.size(); ++i) {
        // Human speakers are renamed after the side they took.
        p.turns.push_back({to_string(agent_for_turn(i)), t.turns[i].display_text});
    }
    return p;
}

inline PacketSet make_rating_packets(std::span<const DebateTranscript> human,
                                     std::span<const DebateTranscript> generated, std::size_t target_len,
                                     std::uint64_t seed) {
    std::vector<std::pair<RatingPacket, Source>> all;
    for (const auto& [set, source] : {std::pair{human, Source::Human}, std::pair{generated, Source::Generated}}) {
        for (const auto& t : set) {
            if (t.turns.size() != target_len) {
                throw EvalError(EvalError::Kind::LengthMismatch,
                                "debate " + t.debate_id + " has " + std::to_string(t.turns.size()) +
                                    " turns, expected " + std::to_string(target_len));
            }
            all.emplace_back(blind(t), source);
        }
    }
    Rng rng(seed);
    rng.shuffle(all);
    PacketSet out;
    const int width = std::max<int>(4, static_cast<int>(std::to_string(all.size()).size()));
    for (std::size_t i = 0; i < all.size(); ++i) {
        std::ostringstream id;
        id << "packet-" << std::setw(width) << std::setfill('0') << (i + 1);
        all[i].first.packet_id = id.str();
        out.key.emplace(id.str(), all[i].second);
        out.packets.push_back(std::move(all[i].first));
    }
    return out;
}

inline nlohmann::ordered_json packet_to_json(const RatingPacket& p) {
    nlohmann::ordered_json j;
    j["packet_id"] = p.packet_id;
    j["subject"] = p.subject;
    auto turns = nlohmann::ordered_json::array();
    for (const auto& t : p.turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
    j["turns"] = std::move(turns);
    j["criteria"] = rating_criteria();
    j["scale"] = {1, 4};
    j["note"] = "___ marks a word the model could not produce.";
    return j;
}

// ---- CSV -------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        const auto len = comma == std::string_view::npos ? std::string_view::npos : comma - start;
        out.emplace_back(trim(line.substr(start, len)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Non-empty lines with a trailing \r removed; the first must equal `header`.
inline std::vector<std::vector<std::string>> read_csv(const std::string& text, const std::string& header) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    bool seen_header = false;
    const auto width = split_csv_line(header).size();
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (!seen_header) {
            if (fields != split_csv_line(header)) {
                throw EvalError(EvalError::Kind::Format, "expected CSV header '" + header + "'");
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != width) {
            throw EvalError(EvalError::Kind::Format, "line " + std::to_string(line_no) + ": expected " +
                                                         std::to_string(width) + " fields");
        }
        rows.push_back(std::move(fields));
    }
    if (!seen_header) throw EvalError(EvalError::Kind::Format, "missing CSV header '" + header + "'");
    return rows;
}

}  // namespace detail

inline const std::string kRatingsHeader = "packet_id,rater_id,style,content,strategy,overall";
inline const std::string kKeyHeader = "packet_id,source";

inline std::string key_to_csv(const PacketKey& key) {
    std::string out = kKeyHeader + "\n";
    for (const auto& [id, source] : key) out += id + "," + to_string(source) + "\n";
    return out;
}

inline PacketKey key_from_csv(const std::string& text) {
    PacketKey key;
    for (const auto& row : detail::read_csv(text, kKeyHeader)) {
        const auto source = parse_source(row[1]);
        if (!source) throw EvalError(EvalError::Kind::Format, "unknown source '" + row[1] + "'");
        if (!key.emplace(row[0], *source).second) {
            throw EvalError(EvalError::Kind::Format, "packet '" + row[0] + "' listed twice in key");
        }
    }
    return key;
}

struct RatingRecord {
    std::string packet_id;
    std::string rater_id;
    // style, content, strategy, overall; 0 marks an unparsable cell.
    std::array<int, 4> scores{};

    bool in_range() const {
        return std::all_of(scores.begin(), scores.end(), [](int s) { return s >= 1 && s <= 4; });
    }
    friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

inline std::string rating_to_csv_row(const RatingRecord& r) {
    std::string out = r.packet_id + "," + r.rater_id;
    for (int s : r.scores) out += "," + std::to_string(s);
    return out + "\n";
}

inline std::vector<RatingRecord> ratings_from_csv(const std::string& text) {
    std::vector<RatingRecord> out;
    for (const auto& row : detail::read_csv(text, kRatingsHeader)) {
        RatingRecord r;
        r.packet_id = row[0];
        r.rater_id = row[1];
        for (std::size_t i = 0; i < 4; ++i) {
            const auto& cell = row[2 + i];
            int v = 0;
            const bool digits = !cell.empty() && cell.size() <= 6 &&
                                std::all_of(cell.begin(), cell.end(), [](char c) { return c >= '0' && c <= '9'; });
            if (digits) v = std::stoi(cell);
            r.scores[i] = v;
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---- aggregation -----------------------------------------------------------

enum class StdMode { Sample, Population };

struct CriterionStats {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;
    // Set when the spread is undefined for this n and reported as 0.
    bool degenerate = false;
};

struct AggregateReport {
    // [source][criterion index]
    std::map<Source, std::array<CriterionStats, 4>> stats;
    std::map<Source, std::size_t> records;
    std::size_t input = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    // Earlier rows for the same (rater, packet), replaced by a later one.
    std::size_t superseded = 0;
    StdMode std_mode = StdMode::Sample;
};

inline CriterionStats summarize(std::vector<int> xs, StdMode mode) {
    CriterionStats s;
    s.n = xs.size();
    if (xs.empty()) {
        s.degenerate = true;
        return s;
    }
    // Sorted so the floating-point reduction order ignores record order.
    std::sort(xs.begin(), xs.end());
    double sum = 0.0;
    for (int x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    const std::size_t dof = mode == StdMode::Sample ? xs.size() - 1 : xs.size();
    if (dof == 0) {
        s.degenerate = true;
        return s;
    }
    double ss = 0.0;
    for (int x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(dof));
    return s;
}

inline AggregateReport aggregate_ratings(std::span<const RatingRecord> records, const PacketKey& key,
                                         StdMode mode = StdMode::Sample) {
    for (const auto& r : records) {
        if (!key.count(r.packet_id)) {
            throw EvalError(EvalError::Kind::UnknownPacket, "packet '" + r.packet_id + "' is not in the key");
        }
    }
    AggregateReport rep;
    rep.std_mode = mode;
    rep.input = records.size();
    std::map<std::pair<std::string, std::string>, const RatingRecord*> last;
    for (const auto& r : records) {
        auto [it, inserted] = last.try_emplace({r.rater_id, r.packet_id}, &r);
        if (!inserted) {
            it->second = &r;
            ++rep.superseded;
        }
    }
    std::map<Source, std::array<std::vector<int>, 4>> values;
    values[Source::Human];
    values[Source::Generated];
    for (const auto& [_, r] : last) {
        if (!r->in_range()) {
            ++rep.rejected;
            continue;
        }
        ++rep.accepted;
        const auto source = key.at(r->packet_id);
        ++rep.records[source];
        for (std::size_t c = 0; c < 4; ++c) values[source][c].push_back(r->scores[c]);
    }
    for (auto& [source, cols] : values) {
        rep.records.try_emplace(source, 0);
        for (std::size_t c = 0; c < 4; ++c) rep.stats[source][c] = summarize(std::move(cols[c]), mode);
    }
    return rep;
}

inline nlohmann::ordered_json report_to_json(const AggregateReport& rep) {
    nlohmann::ordered_json j;
    j["std"] = rep.std_mode == StdMode::Sample ? "sample" : "population";
    j["input"] = rep.input;
    j["accepted"] = rep.accepted;
    j["rejected"] = rep.rejected;
    j["superseded"] = rep.superseded;
    nlohmann::ordered_json sources;
    for (const auto& [source, cols] : rep.stats) {
        nlohmann::ordered_json sj;
        sj["ratings"] = rep.records.at(source);
        for (std::size_t c = 0; c < 4; ++c) {
            const auto& s = cols[c];
            nlohmann::ordered_json cj;
            cj["n"] = s.n;
            cj["mean"] = s.n ? nlohmann::ordered_json(s.mean) : nlohmann::ordered_json(nullptr);
            cj["std"] = s.std;
            cj["degenerate"] = s.degenerate;
            sj[rating_criteria()[c]] = std::move(cj);
        }
        sources[to_string(source)] = std::move(sj);
    }
    j["sources"] = std::move(sources);
    return j;
}

namespace detail {

// Pads to `width` code points.
inline std::string pad(const std::string& s, std::size_t width) {
    std::size_t points = 0;
    for (unsigned char c : s) points += (c & 0xC0) != 0x80;
    return s + std::string(width > points ? width - points : 0, ' ');
}

}  // namespace detail

// criterion rows by source columns, "mean ± std" with three decimals.
inline std::string report_to_text(const AggregateReport& rep) {
    const auto cell = [](const CriterionStats& s) {
        if (s.n == 0) return std::string("-");
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << s.mean << " ± " << s.std << (s.degenerate ? "*" : "");
        return os.str();
    };
    std::ostringstream os;
    os << detail::pad("criterion", 11) << detail::pad("human", 17) << "generated" << '\n';
    for (std::size_t c = 0; c < 4; ++c) {
        os << detail::pad(rating_criteria()[c], 11) << detail::pad(cell(rep.stats.at(Source::Human)[c]), 17)
           << cell(rep.stats.at(Source::Generated)[c]) << '\n';
    }
    os << "ratings: human " << rep.records.at(Source::Human) << ", generated " << rep.records.at(Source::Generated)
       << "; rejected " << rep.rejected << ", superseded " << rep.superseded << '\n';
    bool any_degenerate = false;
    for (const auto& [_, cols] : rep.stats) {
        for (const auto& s : cols) any_degenerate |= s.n > 0 && s.degenerate;
    }
    if (any_degenerate) os << "* single rating: std reported as 0\n";
    return os.str();
}

}  // namespace debate_forge
