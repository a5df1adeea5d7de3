#include "companion/fuzzy_matcher.hpp"

#include <algorithm>
#include <cmath>

#include "companion/utf8.hpp"

namespace companion {

namespace {

double ratio(std::u32string_view q, std::u32string_view c)
{
    const auto longest = std::max(q.size(), c.size());
    return 1.0 - static_cast<double>(levenshtein(q, c)) / static_cast<double>(longest);
}

} // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b)
{
    // Shared prefix and suffix never contribute edits.
    while (!a.empty() && !b.empty() && a.front() == b.front()) {
        a.remove_prefix(1);
        b.remove_prefix(1);
    }
    while (!a.empty() && !b.empty() && a.back() == b.back()) {
        a.remove_suffix(1);
        b.remove_suffix(1);
    }
    if (a.size() < b.size())
        std::swap(a, b);
    if (b.empty())
        return a.size();

    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
            diag = up;
        }
    }
    return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b)
{
    return levenshtein(std::u32string_view(utf8::decode(a)), std::u32string_view(utf8::decode(b)));
}

double similarity(std::string_view q, std::string_view c)
{
    const auto qs = utf8::decode(q);
    const auto cs = utf8::decode(c);
    if (qs.empty() && cs.empty())
        throw Error(Errc::both_empty, "similarity of two empty strings");
    return ratio(qs, cs);
}

double chunked_similarity(std::string_view q, std::string_view c)
{
    const auto qs = utf8::decode(q);
    const auto cs = utf8::decode(c);
    if (qs.empty() && cs.empty())
        throw Error(Errc::both_empty, "similarity of two empty strings");
    if (qs.empty() || cs.size() <= 4 * qs.size())
        return ratio(qs, cs);

    const std::size_t len = qs.size();
    const std::size_t stride = std::max<std::size_t>(1, len / 2);
    const std::u32string_view view(cs);
    double best = 0.0;
    std::size_t pos = 0;
    for (; pos + len <= view.size(); pos += stride) {
        best = std::max(best, ratio(qs, view.substr(pos, len)));
        if (best == 1.0)
            return best;
    }
    if (pos - stride + len < view.size())
        best = std::max(best, ratio(qs, view.substr(view.size() - len)));
    return best;
}

std::vector<std::size_t> find_candidates(double query_fp, const SectionIndex& index, std::size_t window)
{
    const auto& map = index.fingerprint_map();
    if (map.empty())
        throw Error(Errc::empty_index, "fingerprint map of '" + index.chapter_id() + "' is empty");

    auto lb = std::lower_bound(map.begin(), map.end(), query_fp,
                               [](const FingerprintEntry& e, double v) { return e.fingerprint < v; });
    std::size_t nearest = static_cast<std::size_t>(lb - map.begin());
    if (nearest == map.size()) {
        nearest = map.size() - 1;
    } else if (nearest > 0) {
        const double below = std::abs(query_fp - map[nearest - 1].fingerprint);
        const double above = std::abs(map[nearest].fingerprint - query_fp);
        if (below <= above)
            --nearest;
    }

    // Widen to every entry that collides with the nearest fingerprint.
    std::size_t lo = nearest;
    std::size_t hi = nearest;
    while (lo > 0 && map[lo - 1].fingerprint == map[nearest].fingerprint)
        --lo;
    while (hi + 1 < map.size() && map[hi + 1].fingerprint == map[nearest].fingerprint)
        ++hi;

    lo = lo > window ? lo - window : 0;
    hi = std::min(map.size() - 1, hi + window);

    std::vector<std::size_t> out;
    out.reserve(hi - lo + 1);
    for (std::size_t i = lo; i <= hi; ++i)
        out.push_back(i);
    return out;
}

std::vector<MatchResult> match_top_k(std::string_view query, const SectionIndex& index, std::size_t k,
                                     std::size_t window)
{
    const auto normalized = normalize(query);
    if (normalized.empty())
        throw Error(Errc::empty_query, "query is empty after normalization");
    if (k == 0 || window == 0)
        throw Error(Errc::invalid_argument, "k and window must be positive");

    const auto& map = index.fingerprint_map();
    const auto candidates = find_candidates(fingerprint(normalized), index, window);

    std::vector<MatchResult> scored;
    scored.reserve(candidates.size());
    for (std::size_t pos : candidates) {
        const auto& entry = map[pos];
        scored.push_back({entry.paragraph_id, chunked_similarity(normalized, entry.normalized_text), 0});
    }
    std::sort(scored.begin(), scored.end(), [](const MatchResult& a, const MatchResult& b) {
        if (a.similarity != b.similarity)
            return a.similarity > b.similarity;
        return a.paragraph_id < b.paragraph_id;
    });
    if (scored.size() > k)
        scored.resize(k);
    for (std::size_t i = 0; i < scored.size(); ++i)
        scored[i].candidate_rank = i + 1;
    return scored;
}

} // namespace companion
