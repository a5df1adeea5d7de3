#include "doctest.h"

#include <random>

#include "companion/context_selector.hpp"
#include "test_support.hpp"

using namespace companion;

namespace {

Section make_section(const std::vector<std::string>& paragraphs, const std::string& title = "Training Models")
{
    Section s;
    s.section_id = "c/s0001";
    s.chapter_id = "c";
    s.title = title;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        Paragraph p;
        p.paragraph_id = s.section_id + "/p" + std::to_string(i + 1);
        p.raw_text = paragraphs[i];
        p.normalized_text = normalize(p.raw_text);
        s.paragraphs.push_back(p);
    }
    s.token_count = count_tokens(s.full_text());
    return s;
}

} // namespace

TEST_CASE("co-occurrence pairs for a b a with window 2")
{
    // Hand enumeration: (a,b) at distance 1, (b,a) at distance 1, (a,a) at distance 2.
    const auto v = vectorize("a b a", 2);
    CHECK(v.counts.size() == 2);
    CHECK(v.counts.at({"a", "b"}) == 2);
    CHECK(v.counts.at({"a", "a"}) == 1);
    CHECK(v.vocabulary == std::set<std::string>{"a", "b"});

    const auto w1 = vectorize("a b a", 1);
    CHECK(w1.counts.size() == 1);
    CHECK(w1.counts.at({"a", "b"}) == 2);
    CHECK_THROWS_AS(vectorize("a", 0), Error);
}

TEST_CASE("relevance is a cosine in [0, 1]")
{
    const auto a = vectorize("model training loss");
    CHECK(relevance(a, a) == doctest::Approx(1.0));
    CHECK(relevance(a, vectorize("unrelated tokens entirely here")) == 0.0);
    CHECK(relevance(a, vectorize("")) == 0.0);
    const auto b = vectorize("model training data");
    const double r = relevance(a, b);
    CHECK(r > 0.0);
    CHECK(r < 1.0);
    CHECK(r == doctest::Approx(relevance(b, a)));
}

TEST_CASE("sentence splitting")
{
    CHECK(split_sentences("One. Two! Three? Four") == std::vector<std::string>{"One.", "Two!", "Three?", "Four"});
    CHECK(split_sentences("Version 2.5 is out. Next.") == std::vector<std::string>{"Version 2.5 is out.", "Next."});
    CHECK(split_sentences("").empty());
}

TEST_CASE("a section that fits is returned whole")
{
    const auto s = make_section({"First paragraph. Has two sentences.", "Second paragraph."});
    CHECK(select_context(s, ContextBudget{5000, 600}) == s.full_text());
}

TEST_CASE("over budget trims to the first k sentences per paragraph")
{
    std::vector<std::string> paras;
    for (int i = 0; i < 4; ++i) {
        std::string p;
        for (int j = 0; j < 8; ++j)
            p += "Sentence " + std::to_string(j) + " of paragraph " + std::to_string(i) + " has some words. ";
        paras.push_back(p);
    }
    const auto s = make_section(paras);
    const ContextBudget budget{700, 600}; // 100 tokens
    const auto out = select_context(s, budget);
    CHECK(count_tokens(out) <= budget.available());
    CHECK(out.find("Sentence 0 of paragraph 0") != std::string::npos);
    CHECK(out.find("Sentence 0 of paragraph 3") != std::string::npos);
    CHECK(out.find("Sentence 7") == std::string::npos);
}

TEST_CASE("relevance fallback keeps title-related first sentences in document order")
{
    std::vector<std::string> paras;
    for (int i = 0; i < 30; ++i)
        paras.push_back("Filler sentence number " + std::to_string(i) + " talks about weather and lunch plans today.");
    paras[20] = "Training models reduces the loss over many steps of gradient descent.";
    const auto s = make_section(paras, "Training Models");
    const ContextBudget budget{620, 600}; // 20 tokens: room for about one sentence
    const auto out = select_context(s, budget);
    CHECK(count_tokens(out) <= 20);
    CHECK(out.find("Training models") != std::string::npos);
}

TEST_CASE("budget is never exceeded across random sections and budgets")
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 150; ++trial) {
        std::vector<std::string> paras;
        const auto n = 1 + rng() % 25;
        for (std::size_t i = 0; i < n; ++i)
            paras.push_back(testsupport::synthetic_paragraph(rng, 5 + rng() % 120));
        const auto s = make_section(paras, "Model data pipeline");
        const std::size_t available = 10 + rng() % 1500;
        const ContextBudget budget{available + 600, 600};
        const auto out = select_context(s, budget);
        REQUIRE(count_tokens(out) <= available);
        // every emitted block is a prefix of some paragraph
        std::size_t start = 0;
        while (start < out.size()) {
            auto end = out.find("\n\n", start);
            if (end == std::string::npos)
                end = out.size();
            const auto block = out.substr(start, end - start);
            bool found = false;
            for (const auto& p : paras)
                found = found || p.compare(0, block.size(), block) == 0;
            CHECK(found);
            start = end + 2;
        }
    }
}

TEST_CASE("select_context errors")
{
    const auto s = make_section({"Text."});
    CHECK_THROWS_AS(select_context(s, ContextBudget{100, 200}), Error);
    CHECK_THROWS_AS(select_context(make_section({}), ContextBudget{}), Error);
    const auto long_title = make_section({"Text."}, std::string(400, 'x'));
    try {
        select_context(long_title, ContextBudget{650, 600});
        FAIL("expected budget_too_small");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::budget_too_small);
    }
}
