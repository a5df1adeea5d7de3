#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "companion/fuzzy_matcher.hpp"
#include "test_support.hpp"

using namespace companion;

namespace {

std::string random_string(std::mt19937_64& rng, std::size_t max_len, const std::string& alphabet)
{
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s(len(rng), ' ');
    for (auto& c : s)
        c = alphabet[pick(rng)];
    return s;
}

// Linear scan: nearest by |fp - q| (lowest position on ties), its collision run, +-w.
std::set<std::size_t> oracle_candidates(double q, const std::vector<FingerprintEntry>& map, std::size_t w)
{
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < map.size(); ++i)
        if (std::abs(map[i].fingerprint - q) < std::abs(map[nearest].fingerprint - q))
            nearest = i;
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < map.size(); ++i) {
        std::size_t first = map.size(), last = 0;
        for (std::size_t j = 0; j < map.size(); ++j)
            if (map[j].fingerprint == map[nearest].fingerprint) {
                first = std::min(first, j);
                last = std::max(last, j);
            }
        const bool in_run = i >= first && i <= last;
        const bool near_run = (i < first && first - i <= w) || (i > last && i - last <= w);
        if (in_run || near_run)
            out.insert(i);
    }
    return out;
}

} // namespace

TEST_CASE("levenshtein textbook values")
{
    CHECK(levenshtein(std::string_view("kitten"), std::string_view("sitting")) == 3);
    CHECK(similarity("kitten", "sitting") == doctest::Approx(4.0 / 7.0));
    CHECK(levenshtein(std::string_view(""), std::string_view("abc")) == 3);
    CHECK(levenshtein(std::string_view("flaw"), std::string_view("lawn")) == 2);
    CHECK(levenshtein(std::string_view("é"), std::string_view("e")) == 1); // code points, not bytes
    CHECK(similarity("same", "same") == 1.0);
    CHECK_THROWS_AS(similarity("", ""), Error);
}

TEST_CASE("levenshtein matches the matrix oracle on random pairs")
{
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 500; ++i) {
        const auto a = random_string(rng, 40, "abcd");
        const auto b = random_string(rng, 40, "abcd");
        REQUIRE(levenshtein(std::string_view(a), std::string_view(b)) == testsupport::oracle_levenshtein(a, b));
    }
}

TEST_CASE("levenshtein metric properties")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        const auto a = random_string(rng, 20, "xyz ");
        const auto b = random_string(rng, 20, "xyz ");
        const auto c = random_string(rng, 20, "xyz ");
        const auto ab = levenshtein(std::string_view(a), std::string_view(b));
        CHECK(ab == levenshtein(std::string_view(b), std::string_view(a)));
        CHECK((ab == 0) == (a == b));
        CHECK(ab <= levenshtein(std::string_view(a), std::string_view(c)) +
                        levenshtein(std::string_view(c), std::string_view(b)));
        if (!a.empty() || !b.empty()) {
            const double s = similarity(a, b);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
    }
}

TEST_CASE("chunked similarity finds a short query inside a long candidate")
{
    const std::string query = "gradient descent";
    const std::string candidate =
        "training fits parameters by minimizing a loss and gradient descent updates the weights in small steps";
    CHECK(similarity(query, candidate) < 0.3);
    // chunks start every len/2 code points; off-grid placement scores below 1
    CHECK(chunked_similarity(query, candidate) > 0.7);
    const std::string aligned = "gradient descent and then a great deal of other words about training models";
    CHECK(chunked_similarity(query, aligned) == 1.0);
    // not longer than 4x: plain similarity
    CHECK(chunked_similarity("abcd", "abcdabcdabcd") == similarity("abcd", "abcdabcdabcd"));
}

TEST_CASE("candidate window matches a linear-scan oracle")
{
    const auto text = testsupport::synthetic_chapter(5, 10, 10, 12);
    const auto idx = index_document(text, "syn", MarkupFormat::Markdown);
    const auto& map = idx.fingerprint_map();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> q(map.front().fingerprint - 2, map.back().fingerprint + 2);
    for (std::size_t w : {1u, 4u, 16u}) {
        for (int i = 0; i < 200; ++i) {
            const double fp = i % 10 == 0 ? map[rng() % map.size()].fingerprint : q(rng);
            const auto got = find_candidates(fp, idx, w);
            const std::set<std::size_t> got_set(got.begin(), got.end());
            REQUIRE(got_set == oracle_candidates(fp, map, w));
        }
    }
}

TEST_CASE("collisions widen the candidate set beyond 2w+1")
{
    // Four paragraphs that are anagrams share one fingerprint.
    const auto idx = index_document("# T\n\nabc\n\nbca\n\ncab\n\nacb\n\nzzzz\n\naaaa\n", "c", MarkupFormat::Markdown);
    const auto fp = fingerprint("abc");
    const auto got = find_candidates(fp, idx, 0);
    CHECK(got.size() == 4);
}

TEST_CASE("verbatim query returns its paragraph first")
{
    const auto text = testsupport::synthetic_chapter(8, 6, 6, 25);
    const auto idx = index_document(text, "syn", MarkupFormat::Markdown);
    for (const auto& s : idx.sections())
        for (const auto& p : s.paragraphs) {
            const auto top = match_top_k(p.raw_text, idx, 3);
            REQUIRE(!top.empty());
            CHECK(top[0].similarity == 1.0);
            // identical normalized texts may tie; the id order then decides
            const auto* first = idx.find_paragraph(top[0].paragraph_id);
            CHECK(first->normalized_text == p.normalized_text);
            CHECK(top[0].candidate_rank == 1);
        }
}

TEST_CASE("results are ordered by similarity then paragraph id")
{
    const auto idx = index_document("# T\n\nalpha beta\n\nalpha beta\n\nalpha betx\n\nunrelated words\n", "c",
                                    MarkupFormat::Markdown);
    const auto top = match_top_k("alpha beta", idx, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].paragraph_id == "c/s0001/p0001");
    CHECK(top[1].paragraph_id == "c/s0001/p0002");
    CHECK(top[2].similarity < 1.0);
    for (std::size_t i = 1; i < top.size(); ++i)
        CHECK(top[i - 1].similarity >= top[i].similarity);
}

TEST_CASE("match_top_k errors")
{
    const auto idx = index_document("# T\n\nbody\n", "c", MarkupFormat::Markdown);
    CHECK_THROWS_AS(match_top_k("  ...  ", idx, 3), Error);
    CHECK_THROWS_AS(match_top_k("body", idx, 0), Error);
    try {
        match_top_k("", idx, 3);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_query);
    }
}
