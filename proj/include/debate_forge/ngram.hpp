#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "debate_forge/corpus.hpp"
#include "debate_forge/error.hpp"
#include "debate_forge/generation.hpp"
#include "debate_forge/random.hpp"

namespace debate_forge {

// Count-based n-gram model scored with stupid backoff. The lowest order is
// add-one smoothed: (c(t) + 1) / (N + V).
class NgramModel {
public:
    using Ids = std::vector<int>;

    NgramModel() = default;

    // `vocab` fixes token ids; stream tokens outside it map to <unk> when the
    // vocabulary has one and are rejected otherwise.
    static NgramModel train(std::span<const Tokens> streams, std::vector<Token> vocab, int order = 3,
                            double alpha = 0.4, bool uses_separator = false) {
        if (order < 1) throw CorpusError("n-gram order must be at least 1");
        if (!(alpha >= 0.0)) throw CorpusError("backoff factor must be non-negative");
        NgramModel m;
        m.order_ = order;
        m.alpha_ = alpha;
        m.uses_separator_ = uses_separator;
        m.set_vocab(std::move(vocab));
        m.tables_.assign(static_cast<std::size_t>(order), {});
        for (const auto& stream : streams) {
            Ids ids;
            ids.reserve(stream.size());
            for (const auto& t : stream) {
                const int id = m.id(t);
                if (id < 0) throw CorpusError("token '" + t + "' is not in the model vocabulary");
                ids.push_back(id);
            }
            for (std::size_t i = 0; i < ids.size(); ++i) {
                for (std::size_t k = 0; k < m.tables_.size() && k <= i; ++k) {
                    const auto end = ids.begin() + static_cast<std::ptrdiff_t>(i);
                    Ids ctx(end - static_cast<std::ptrdiff_t>(k), end);
                    ++m.tables_[k][ctx][ids[i]];
                }
            }
        }
        if (m.tables_[0].empty()) throw BackendError(BackendError::Kind::EmptyCorpus, "no training tokens");
        m.finish();
        return m;
    }

    // Vocabulary is the sorted set of distinct stream tokens.
    static NgramModel train(std::span<const Tokens> streams, int order = 3, double alpha = 0.4) {
        std::set<Token> distinct;
        for (const auto& s : streams) distinct.insert(s.begin(), s.end());
        return train(streams, std::vector<Token>(distinct.begin(), distinct.end()), order, alpha);
    }

    int order() const { return order_; }
    double alpha() const { return alpha_; }
    bool uses_separator() const { return uses_separator_; }
    const std::vector<Token>& vocab() const { return vocab_; }
    std::size_t vocab_size() const { return vocab_.size(); }
    std::uint64_t total() const { return total_; }

    // Id of `t`, falling back to <unk>; -1 when neither is known.
    int id(const Token& t) const {
        auto it = ids_.find(t);
        if (it != ids_.end()) return it->second;
        it = ids_.find(special::kUnk);
        return it == ids_.end() ? -1 : it->second;
    }

    std::uint64_t count(const Tokens& ngram) const {
        if (ngram.empty() || ngram.size() > tables_.size()) return 0;
        const auto ids = to_ids(ngram);
        Ids ctx(ids.begin(), ids.end() - 1);
        const auto* next = continuations(ctx);
        if (!next) return 0;
        auto it = next->find(ids.back());
        return it == next->end() ? 0 : it->second;
    }

    // Sum of continuation counts of `context`.
    std::uint64_t context_count(const Tokens& context) const {
        if (context.size() >= tables_.size()) return 0;
        auto it = totals_[context.size()].find(to_ids(context));
        return it == totals_[context.size()].end() ? 0 : it->second;
    }

    // Stupid-backoff score of `t` after `history`.
    double prob(const Tokens& history, const Token& t) const {
        const auto h = tail(to_ids(history));
        return prob_ids(h, id(t), h.size());
    }

    // Scores of every vocabulary id after `history`, built top-down from the
    // count tables rather than token by token.
    std::vector<double> scores(const Tokens& history) const {
        const auto h = tail(to_ids(history));
        const std::size_t L = h.size();
        std::vector<double> s(vocab_.size());
        const double ground = std::pow(alpha_, static_cast<double>(L));
        const auto& unigrams = tables_[0].begin()->second;
        for (std::size_t t = 0; t < s.size(); ++t) {
            auto it = unigrams.find(static_cast<int>(t));
            const double c = it == unigrams.end() ? 0.0 : static_cast<double>(it->second);
            s[t] = ground * (c + 1.0) / denominator();
        }
        for (std::size_t k = 1; k <= L; ++k) {
            const Ids ctx(h.end() - static_cast<std::ptrdiff_t>(k), h.end());
            const auto* next = continuations(ctx);
            if (!next) continue;
            const double scale = std::pow(alpha_, static_cast<double>(L - k)) /
                                 static_cast<double>(totals_[k].at(ctx));
            for (const auto& [t, c] : *next) s[static_cast<std::size_t>(t)] = scale * static_cast<double>(c);
        }
        return s;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["order"] = order_;
        j["alpha"] = alpha_;
        j["uses_separator"] = uses_separator_;
        j["vocab"] = vocab_;
        auto rows = nlohmann::ordered_json::array();
        for (const auto& table : tables_) {
            for (const auto& [ctx, next] : table) {
                for (const auto& [t, c] : next) {
                    auto row = nlohmann::ordered_json::array();
                    for (int x : ctx) row.push_back(x);
                    row.push_back(t);
                    row.push_back(c);
                    rows.push_back(std::move(row));
                }
            }
        }
        j["ngrams"] = std::move(rows);
        return j;
    }

    static NgramModel from_json(const nlohmann::json& j) {
        try {
            NgramModel m;
            m.order_ = j.at("order").get<int>();
            m.alpha_ = j.at("alpha").get<double>();
            m.uses_separator_ = j.value("uses_separator", false);
            if (m.order_ < 1) throw CorpusError("n-gram order must be at least 1");
            m.set_vocab(j.at("vocab").get<std::vector<Token>>());
            m.tables_.assign(static_cast<std::size_t>(m.order_), {});
            const int v = static_cast<int>(m.vocab_.size());
            for (const auto& row : j.at("ngrams")) {
                if (row.size() < 2 || row.size() > m.tables_.size() + 1) throw CorpusError("bad n-gram row");
                Ids ctx;
                for (std::size_t i = 0; i + 2 < row.size(); ++i) ctx.push_back(row[i].get<int>());
                const int t = row[row.size() - 2].get<int>();
                for (int x : ctx) {
                    if (x < 0 || x >= v) throw CorpusError("n-gram id out of range");
                }
                if (t < 0 || t >= v) throw CorpusError("n-gram id out of range");
                m.tables_[ctx.size()][ctx][t] = row.back().get<std::uint64_t>();
            }
            if (m.tables_[0].empty()) throw CorpusError("model has no unigram counts");
            m.finish();
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(std::string("bad model file: ") + e.what());
        }
    }

private:
    using Next = std::map<int, std::uint64_t>;

    void set_vocab(std::vector<Token> vocab) {
        vocab_ = std::move(vocab);
        ids_.clear();
        for (std::size_t i = 0; i < vocab_.size(); ++i) {
            if (!ids_.emplace(vocab_[i], static_cast<int>(i)).second) {
                throw CorpusError("duplicate vocabulary token '" + vocab_[i] + "'");
            }
        }
        if (vocab_.empty()) throw CorpusError("empty model vocabulary");
    }

    void finish() {
        totals_.assign(tables_.size(), {});
        for (std::size_t k = 0; k < tables_.size(); ++k) {
            for (const auto& [ctx, next] : tables_[k]) {
                std::uint64_t sum = 0;
                for (const auto& [_, c] : next) sum += c;
                totals_[k][ctx] = sum;
            }
        }
        total_ = totals_[0].begin()->second;
    }

    double denominator() const { return static_cast<double>(total_ + vocab_.size()); }

    Ids to_ids(const Tokens& tokens) const {
        Ids out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(id(t));
        return out;
    }

    Ids tail(Ids h) const {
        const std::size_t keep = static_cast<std::size_t>(order_ - 1);
        if (h.size() > keep) h.erase(h.begin(), h.end() - static_cast<std::ptrdiff_t>(keep));
        return h;
    }

    const Next* continuations(const Ids& ctx) const {
        if (ctx.size() >= tables_.size()) return nullptr;
        auto it = tables_[ctx.size()].find(ctx);
        return it == tables_[ctx.size()].end() ? nullptr : &it->second;
    }

    // Score of `t` given the last `k` ids of `h`.
    double prob_ids(const Ids& h, int t, std::size_t k) const {
        if (k == 0) {
            std::uint64_t c = 0;
            if (t >= 0) {
                const auto& unigrams = tables_[0].begin()->second;
                auto it = unigrams.find(t);
                if (it != unigrams.end()) c = it->second;
            }
            return (static_cast<double>(c) + 1.0) / denominator();
        }
        const Ids ctx(h.end() - static_cast<std::ptrdiff_t>(k), h.end());
        if (const auto* next = continuations(ctx)) {
            auto it = next->find(t);
            if (it != next->end()) {
                return static_cast<double>(it->second) / static_cast<double>(totals_[k].at(ctx));
            }
        }
        return alpha_ * prob_ids(h, t, k - 1);
    }

    int order_ = 3;
    double alpha_ = 0.4;
    bool uses_separator_ = false;
    std::vector<Token> vocab_;
    std::unordered_map<Token, int> ids_;
    // tables_[k][context of length k][next id] = count
    std::vector<std::map<Ids, Next>> tables_;
    std::vector<std::map<Ids, std::uint64_t>> totals_;
    std::uint64_t total_ = 0;
};

// Trains on prompt <turn> response for every training pair.
inline NgramModel train_ngram(const Corpus& corpus, int order = 3, double alpha = 0.4) {
    if (corpus.train.empty()) throw BackendError(BackendError::Kind::EmptyCorpus, "training split is empty");
    std::vector<Tokens> streams;
    streams.reserve(corpus.train.size());
    for (const auto& ex : corpus.train) {
        Tokens s = ex.prompt;
        s.push_back(special::kTurn);
        s.insert(s.end(), ex.response.begin(), ex.response.end());
        streams.push_back(std::move(s));
    }
    return NgramModel::train(streams, corpus.vocab.tokens(), order, alpha, true);
}

// Total natural-log score of `tokens`, each conditioned on `context` plus the
// tokens before it.
inline double ngram_score(const NgramModel& model, const Tokens& tokens, const Tokens& context = {}) {
    Tokens history = context;
    double total = 0.0;
    for (const auto& t : tokens) {
        total += std::log(model.prob(history, t));
        history.push_back(t);
    }
    return total;
}

// History a response is generated and scored against.
inline Tokens ngram_context(const NgramModel& model, const Tokens& prompt) {
    Tokens h = prompt;
    if (model.uses_separator()) h.push_back(special::kTurn);
    return h;
}

namespace detail {

// Normalized sampling weights at `temperature` (> 0).
inline std::vector<double> sampling_weights(const std::vector<double>& scores, double temperature,
                                            const std::vector<bool>& allowed) {
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(scores.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!allowed[i] || scores[i] <= 0.0) continue;
        logs[i] = std::log(scores[i]) / temperature;
        max_log = std::max(max_log, logs[i]);
    }
    std::vector<double> w(scores.size(), 0.0);
    if (!std::isfinite(max_log)) return w;
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::isfinite(logs[i])) sum += w[i] = std::exp(logs[i] - max_log);
    }
    for (auto& x : w) x /= sum;
    return w;
}

inline std::size_t argmax_lowest(const std::vector<double>& scores, const std::vector<bool>& allowed) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (allowed[i] && (best == scores.size() || scores[i] > scores[best])) best = i;
    }
    return best;
}

}  // namespace detail

// Normalized next-token distribution over the vocabulary (the separator is
// excluded for corpus-trained models).
inline std::vector<double> next_token_distribution(const NgramModel& model, const Tokens& history,
                                                   double temperature = 1.0) {
    std::vector<bool> allowed(model.vocab_size(), true);
    if (model.uses_separator()) {
        const int sep = model.id(special::kTurn);
        if (sep >= 0 && model.vocab()[static_cast<std::size_t>(sep)] == special::kTurn) allowed[sep] = false;
    }
    const auto scores = model.scores(history);
    if (temperature == 0.0) {
        std::vector<double> w(scores.size(), 0.0);
        const auto best = detail::argmax_lowest(scores, allowed);
        if (best < w.size()) w[best] = 1.0;
        return w;
    }
    return detail::sampling_weights(scores, temperature, allowed);
}

inline Tokens generate_ngram(const NgramModel& model, const GenerationRequest& req) {
    validate_request(req);
    Rng rng(req.seed);
    Tokens history = ngram_context(model, req.prompt);
    Tokens out;
    for (int i = 0; i < req.max_tokens; ++i) {
        const auto p = next_token_distribution(model, history, req.temperature);
        std::size_t pick = p.size();
        if (req.temperature == 0.0) {
            pick = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        } else {
            const double u = rng.unit();
            double acc = 0.0;
            for (std::size_t t = 0; t < p.size(); ++t) {
                if (p[t] == 0.0) continue;
                acc += p[t];
                pick = t;
                if (u < acc) break;
            }
        }
        if (pick >= p.size() || p[pick] == 0.0) break;
        const Token& tok = model.vocab()[pick];
        if (tok == special::kEos) break;
        out.push_back(tok);
        history.push_back(tok);
    }
    return ensure_eos(std::move(out), req.max_tokens);
}

class NgramBackend : public GeneratorBackend {
public:
    explicit NgramBackend(std::shared_ptr<const NgramModel> model) : model_(std::move(model)) {}

    Tokens generate(const GenerationRequest& req) override { return generate_ngram(*model_, req); }
    std::string describe() const override { return "ngram:" + std::to_string(model_->order()); }

    const NgramModel& model() const { return *model_; }

private:
    std::shared_ptr<const NgramModel> model_;
};

}  // namespace debate_forge
