#include "companion/context_selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "companion/utf8.hpp"

namespace companion {

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> words_of(std::string_view text)
{
    const auto normalized = normalize(text);
    std::vector<std::string> words;
    std::size_t start = 0;
    while (start < normalized.size()) {
        auto end = normalized.find(' ', start);
        if (end == std::string::npos)
            end = normalized.size();
        words.push_back(normalized.substr(start, end - start));
        start = end + 1;
    }
    return words;
}

std::string first_sentences(const std::vector<std::string>& sentences, std::size_t k)
{
    std::string out;
    for (std::size_t i = 0; i < std::min(k, sentences.size()); ++i) {
        if (i)
            out.push_back(' ');
        out += sentences[i];
    }
    return out;
}

std::string join_blocks(const std::vector<std::string>& blocks)
{
    std::string out;
    for (const auto& b : blocks) {
        if (b.empty())
            continue;
        if (!out.empty())
            out += "\n\n";
        out += b;
    }
    return out;
}

} // namespace

CooccurrenceVector vectorize(std::string_view text, std::size_t window)
{
    if (window == 0)
        throw Error(Errc::invalid_argument, "co-occurrence window must be positive");
    CooccurrenceVector v;
    const auto words = words_of(text);
    v.vocabulary.insert(words.begin(), words.end());
    for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t j = i + 1; j <= i + window && j < words.size(); ++j) {
            const auto& a = words[i];
            const auto& b = words[j];
            ++v.counts[a <= b ? std::make_pair(a, b) : std::make_pair(b, a)];
        }
    }
    return v;
}

double relevance(const CooccurrenceVector& a, const CooccurrenceVector& b)
{
    if (a.empty() || b.empty())
        return 0.0;
    const auto& small = a.counts.size() <= b.counts.size() ? a.counts : b.counts;
    const auto& large = a.counts.size() <= b.counts.size() ? b.counts : a.counts;

    double dot = 0.0;
    for (const auto& [pair, count] : small) {
        auto it = large.find(pair);
        if (it != large.end())
            dot += static_cast<double>(count) * static_cast<double>(it->second);
    }
    auto norm = [](const auto& counts) {
        double sum = 0.0;
        for (const auto& [pair, count] : counts)
            sum += static_cast<double>(count) * static_cast<double>(count);
        return std::sqrt(sum);
    };
    const double result = dot / (norm(a.counts) * norm(b.counts));
    return std::clamp(result, 0.0, 1.0);
}

std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    auto push = [&](std::size_t end) {
        auto piece = text.substr(start, end - start);
        while (!piece.empty() && is_space(piece.front()))
            piece.remove_prefix(1);
        while (!piece.empty() && is_space(piece.back()))
            piece.remove_suffix(1);
        if (!piece.empty())
            out.emplace_back(piece);
    };
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && is_space(text[i + 1])) {
            push(i + 1);
            start = i + 1;
        }
    }
    push(text.size());
    return out;
}

std::string select_context(const Section& section, const ContextBudget& budget, std::size_t k_init)
{
    if (budget.limit_tokens < budget.reserved_tokens)
        throw Error(Errc::invalid_argument, "reserved tokens exceed the token limit");
    if (section.paragraphs.empty())
        throw Error(Errc::empty_context, "section '" + section.section_id + "' has no paragraphs");
    if (k_init == 0)
        throw Error(Errc::invalid_argument, "k_init must be positive");

    const std::size_t available = budget.available();
    if (count_tokens(section.title) > available)
        throw Error(Errc::budget_too_small,
                    "token budget " + std::to_string(available) + " is smaller than the section title");

    auto full = section.full_text();
    if (count_tokens(full) <= available)
        return full;

    std::vector<std::vector<std::string>> sentences;
    sentences.reserve(section.paragraphs.size());
    for (const auto& p : section.paragraphs)
        sentences.push_back(split_sentences(p.raw_text));

    std::vector<std::string> blocks(sentences.size());
    for (std::size_t k = k_init; k >= 1; --k) {
        for (std::size_t i = 0; i < sentences.size(); ++i)
            blocks[i] = first_sentences(sentences[i], k);
        auto text = join_blocks(blocks);
        if (count_tokens(text) <= available)
            return text;
    }

    // Still over budget with one sentence per paragraph: keep the first sentences
    // most related to the title, in relevance order, while they fit.
    const auto anchor = vectorize(section.title);
    std::vector<double> score(blocks.size(), 0.0);
    std::vector<std::size_t> length(blocks.size(), 0);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        score[i] = relevance(vectorize(blocks[i]), anchor);
        length[i] = utf8::length(blocks[i]);
    }
    std::vector<std::size_t> order(blocks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    const std::size_t char_budget = available * 4;
    std::size_t used = 0;
    std::vector<bool> keep(blocks.size(), false);
    for (std::size_t i : order) {
        if (length[i] == 0)
            continue;
        const std::size_t cost = length[i] + (used == 0 ? 0 : 2);
        if (used + cost <= char_budget) {
            used += cost;
            keep[i] = true;
        }
    }
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (keep[i])
            kept.push_back(blocks[i]);
    return join_blocks(kept);
}

} // namespace companion
