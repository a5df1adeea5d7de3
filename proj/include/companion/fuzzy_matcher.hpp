#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "companion/content_indexer.hpp"

namespace companion {

inline constexpr std::size_t kDefaultCandidateWindow = 16;

struct MatchResult {
    std::string paragraph_id;
    double similarity = 0.0;
    std::size_t candidate_rank = 0; // 1-based
};

/// Edit distance over code points with unit insert/delete/substitute costs.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - lev(q, c) / max(|q|, |c|). Throws Errc::both_empty when both are empty.
double similarity(std::string_view q, std::string_view c);

/// Similarity where a candidate more than four times longer than the query is
/// scored per query-sized chunk (stride half the query length) and the best chunk wins.
double chunked_similarity(std::string_view q, std::string_view c);

/// Positions in index.fingerprint_map(): the entry nearest `query_fp`, every entry sharing
/// its fingerprint, and `window` neighbours on each side, clipped to the map bounds.
std::vector<std::size_t> find_candidates(double query_fp, const SectionIndex& index,
                                         std::size_t window = kDefaultCandidateWindow);

/// Normalizes and fingerprints the query, scores the candidates and returns the best k,
/// ordered by similarity descending then paragraph id ascending.
std::vector<MatchResult> match_top_k(std::string_view query, const SectionIndex& index, std::size_t k,
                                     std::size_t window = kDefaultCandidateWindow);

} // namespace companion
