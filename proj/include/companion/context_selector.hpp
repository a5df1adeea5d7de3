#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "companion/content_indexer.hpp"

namespace companion {

inline constexpr std::size_t kDefaultTokenLimit = 5000;
inline constexpr std::size_t kDefaultReservedTokens = 600;
inline constexpr std::size_t kDefaultInitialSentences = 5;
inline constexpr std::size_t kDefaultCooccurrenceWindow = 4;

struct ContextBudget {
    std::size_t limit_tokens = kDefaultTokenLimit;
    std::size_t reserved_tokens = kDefaultReservedTokens;

    std::size_t available() const { return limit_tokens - reserved_tokens; }
};

/// Sparse word co-occurrence counts keyed by canonically ordered word pairs.
struct CooccurrenceVector {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    std::set<std::string> vocabulary;

    bool empty() const { return counts.empty(); }
};

/// Counts pairs of normalized words at distance 1..window in the word sequence.
CooccurrenceVector vectorize(std::string_view text, std::size_t window = kDefaultCooccurrenceWindow);

/// Cosine similarity over the pair space; 0 when either side is empty.
double relevance(const CooccurrenceVector& a, const CooccurrenceVector& b);

/// Sentences end at '.', '!' or '?' followed by whitespace; the terminator stays with its sentence.
std::vector<std::string> split_sentences(std::string_view text);

/// Text for quiz generation that fits within budget.available() tokens.
/// Whole section when it fits; otherwise the first k sentences of every paragraph,
/// shrinking k from k_init to 1; otherwise first sentences ranked by relevance to the title.
std::string select_context(const Section& section, const ContextBudget& budget,
                           std::size_t k_init = kDefaultInitialSentences);

} // namespace companion
