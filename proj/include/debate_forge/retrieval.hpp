#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "debate_forge/corpus.hpp"
#include "debate_forge/error.hpp"
#include "debate_forge/generation.hpp"

namespace debate_forge {

// Nearest-prompt lookup over training pairs. Term weights are
// ln(1 + tf) * ln(N / df); special tokens are not terms.
class RetrievalIndex {
public:
    struct Entry {
        Tokens prompt;
        Tokens response;
    };
    using Vector = std::map<Token, double>;

    RetrievalIndex() = default;

    explicit RetrievalIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw BackendError(BackendError::Kind::EmptyIndex, "retrieval index has no pairs");
        for (const auto& e : entries_) {
            for (const auto& [term, _] : term_counts(e.prompt)) ++df_[term];
        }
        vectors_.reserve(entries_.size());
        for (const auto& e : entries_) vectors_.push_back(weigh(e.prompt));
    }

    std::size_t size() const { return entries_.size(); }
    const Entry& entry(std::size_t i) const { return entries_.at(i); }

    Vector weigh(const Tokens& tokens) const {
        Vector v;
        const double n = static_cast<double>(entries_.size());
        for (const auto& [term, tf] : term_counts(tokens)) {
            auto it = df_.find(term);
            if (it == df_.end()) continue;
            const double w = std::log1p(static_cast<double>(tf)) * std::log(n / static_cast<double>(it->second));
            if (w > 0.0) v.emplace(term, w);
        }
        return v;
    }

    static double cosine(const Vector& a, const Vector& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& [t, w] : a) {
            na += w * w;
            auto it = b.find(t);
            if (it != b.end()) dot += w * it->second;
        }
        for (const auto& [_, w] : b) nb += w * w;
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    }

    std::vector<double> similarities(const Tokens& query) const {
        const auto q = weigh(query);
        std::vector<double> out;
        out.reserve(vectors_.size());
        for (const auto& v : vectors_) out.push_back(cosine(q, v));
        return out;
    }

    // Index of the most similar prompt; the earliest pair wins ties.
    std::size_t best_match(const Tokens& query) const {
        const auto sims = similarities(query);
        std::size_t best = 0;
        for (std::size_t i = 1; i < sims.size(); ++i) {
            if (sims[i] > sims[best]) best = i;
        }
        return best;
    }

private:
    static std::map<Token, std::size_t> term_counts(const Tokens& tokens) {
        std::map<Token, std::size_t> tf;
        for (const auto& t : tokens) {
            if (!special::is_special(t)) ++tf[t];
        }
        return tf;
    }

    std::vector<Entry> entries_;
    std::unordered_map<Token, std::size_t> df_;
    std::vector<Vector> vectors_;
};

inline RetrievalIndex build_retrieval_index(const Corpus& corpus) {
    std::vector<RetrievalIndex::Entry> entries;
    entries.reserve(corpus.train.size());
    for (const auto& ex : corpus.train) entries.push_back({ex.prompt, ex.response});
    return RetrievalIndex(std::move(entries));
}

inline Tokens generate_retrieval(const RetrievalIndex& index, const GenerationRequest& req) {
    validate_request(req);
    if (index.size() == 0) throw BackendError(BackendError::Kind::EmptyIndex, "retrieval index has no pairs");
    return ensure_eos(index.entry(index.best_match(req.prompt)).response, req.max_tokens);
}

class RetrievalBackend : public GeneratorBackend {
public:
    explicit RetrievalBackend(std::shared_ptr<const RetrievalIndex> index) : index_(std::move(index)) {}

    Tokens generate(const GenerationRequest& req) override { return generate_retrieval(*index_, req); }
    std::string describe() const override { return "retrieval"; }

private:
    std::shared_ptr<const RetrievalIndex> index_;
};

}  // namespace debate_forge
