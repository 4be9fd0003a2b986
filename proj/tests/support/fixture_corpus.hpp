#pragma once

#include "debate_forge/corpus.hpp"
#include "support/fixtures.hpp"

namespace testing_support {

// Every fixture tree lands in train under the default ratios.
inline debate_forge::Corpus fixture_corpus(debate_forge::StrategyName strategy, std::size_t min_count = 1) {
    debate_forge::CorpusOptions opts;
    opts.min_count = min_count;
    return debate_forge::build_corpus(fixture_trees(), debate_forge::ParsingStrategy::builtin(strategy), opts);
}

}  // namespace testing_support
