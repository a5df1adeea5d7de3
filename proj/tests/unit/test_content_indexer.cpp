#include "doctest.h"

#include <cmath>
#include <random>

#include "companion/content_indexer.hpp"
#include "companion/service_api.hpp"
#include "test_support.hpp"

using namespace companion;

TEST_CASE("normalize lowercases, strips punctuation and collapses whitespace")
{
    CHECK(normalize("Hello,  World!") == "hello world");
    CHECK(normalize("  a\t\nb  ") == "a b");
    CHECK(normalize("!!!") == "");
    CHECK(normalize("Café déjà") == "café déjà"); // non-ASCII passes through
}

TEST_CASE("fingerprint is the mean code point")
{
    CHECK(fingerprint("ab") == doctest::Approx((97.0 + 98.0) / 2));
    CHECK(fingerprint("a") == doctest::Approx(97.0));
    // "é" is one code point (233), not two bytes
    CHECK(fingerprint("é") == doctest::Approx(233.0));
    CHECK_THROWS_AS(fingerprint(""), Error);
}

TEST_CASE("token estimate is ceil(code points / 4)")
{
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("abcd") == 1);
    CHECK(count_tokens("abcde") == 2);
    CHECK(count_tokens("héllo") == 2);
    std::mt19937 rng(7);
    for (int i = 0; i < 200; ++i) {
        std::string s(static_cast<std::size_t>(rng() % 300), 'x');
        CHECK(count_tokens(s) == (s.size() + 3) / 4);
    }
}

TEST_CASE("markdown fixture chapter")
{
    const auto corpus = ingest_directory(testsupport::fixture_corpus());
    const auto* ch = corpus.find_chapter("ml_systems");
    REQUIRE(ch != nullptr);
    CHECK(ch->title() == "Machine Learning Systems");
    REQUIRE(ch->sections().size() == 5);
    CHECK(ch->sections()[1].title == "Data Pipelines");
    CHECK(ch->sections()[1].heading_level == 2);
    CHECK(ch->sections()[1].paragraphs.size() == 5); // two paragraphs and three list items
    CHECK(ch->sections()[1].figures == std::vector<std::string>{"Pipeline stages"});
    CHECK(ch->sections()[0].section_id == "ml_systems/s0001");
    CHECK(ch->sections()[0].paragraphs[0].paragraph_id == "ml_systems/s0001/p0001");

    for (const auto& s : ch->sections())
        CHECK(s.token_count == count_tokens(s.full_text()));
}

TEST_CASE("html fixture chapter")
{
    const auto corpus = ingest_directory(testsupport::fixture_corpus());
    const auto* ch = corpus.find_chapter("edge_ai");
    REQUIRE(ch != nullptr);
    CHECK(ch->title() == "Edge AI");
    REQUIRE(ch->sections().size() == 4);
    // <li> with an omitted end tag still yields its own paragraph
    CHECK(ch->sections()[1].paragraphs.size() == 5);
    CHECK(ch->sections()[1].paragraphs[3].raw_text == "Power limits sustained throughput.");
    CHECK(ch->sections()[2].figures.size() == 1);
    const auto* p = ch->find_paragraph("edge_ai/s0004/p0002");
    REQUIRE(p != nullptr);
    CHECK(p->raw_text.find("updates & sampling") != std::string::npos);
    for (const auto& s : ch->sections())
        for (const auto& para : s.paragraphs)
            CHECK(para.raw_text.find("margin") == std::string::npos); // <style> skipped
}

TEST_CASE("fingerprint map is sorted and covers every nonempty paragraph")
{
    const auto text = testsupport::synthetic_chapter(11, 12, 8, 30);
    const auto idx = index_document(text, "syn", MarkupFormat::Markdown);
    const auto& map = idx.fingerprint_map();
    std::size_t nonempty = 0;
    for (const auto& s : idx.sections())
        for (const auto& p : s.paragraphs)
            if (!p.normalized_text.empty()) {
                ++nonempty;
                REQUIRE(p.fingerprint.has_value());
                CHECK(*p.fingerprint == doctest::Approx(fingerprint(p.normalized_text)));
            }
    CHECK(map.size() == nonempty);
    for (std::size_t i = 1; i < map.size(); ++i) {
        const bool ordered = map[i - 1].fingerprint < map[i].fingerprint ||
                             (map[i - 1].fingerprint == map[i].fingerprint &&
                              map[i - 1].paragraph_id < map[i].paragraph_id);
        CHECK(ordered);
    }
}

TEST_CASE("text before the first heading lands in an implicit section")
{
    const auto idx = index_document("Intro text here.\n\n# Title\n\nBody.\n", "c", MarkupFormat::Markdown, "Preface");
    REQUIRE(idx.sections().size() == 2);
    CHECK(idx.sections()[0].title == "Preface");
    CHECK(idx.sections()[0].paragraphs[0].raw_text == "Intro text here.");
    CHECK(idx.title() == "Title");
}

TEST_CASE("malformed markup is reported with a position")
{
    try {
        index_document("# T\n\ntext\n\n```\ncode never closed\n", "c", MarkupFormat::Markdown);
        FAIL("expected MarkupError");
    } catch (const MarkupError& e) {
        CHECK(e.code() == Errc::malformed_markup);
        CHECK(e.line() == 5);
    }
    CHECK_THROWS_AS(index_document("<h1>T</h1><div><p>x</span></div>", "c", MarkupFormat::Html), MarkupError);
    CHECK_THROWS_AS(index_document("<h1>T</h1><!-- open", "c", MarkupFormat::Html), MarkupError);
    CHECK_THROWS_AS(index_document("", "c", MarkupFormat::Markdown), Error);
}

TEST_CASE("index json round-trips")
{
    const auto corpus = ingest_directory(testsupport::fixture_corpus());
    for (const auto& ch : corpus.chapters()) {
        const auto text = to_json(ch);
        const auto back = section_index_from_json(text);
        CHECK(to_json(back) == text);
        CHECK(back.paragraph_count() == ch.paragraph_count());
    }
}

TEST_CASE("tampered index fingerprints are rejected")
{
    const auto idx = index_document("# T\n\nSome paragraph text.\n", "c", MarkupFormat::Markdown);
    auto text = to_json(idx);
    auto doc = nlohmann::json::parse(text);
    doc["sections"][0]["paragraphs"][0]["fingerprint"] = 1.0;
    CHECK_THROWS_AS(section_index_from_json(doc.dump()), Error);
}

TEST_CASE("corpus lookups")
{
    const auto corpus = ingest_directory(testsupport::fixture_corpus());
    CHECK(corpus.find_section("edge_ai/s0002") != nullptr);
    CHECK(corpus.find_section("edge_ai/s0099") == nullptr);
    CHECK(corpus.find_chapter("nope") == nullptr);
    std::vector<SectionIndex> dup{corpus.chapters()[0], corpus.chapters()[0]};
    CHECK_THROWS_AS(Corpus{dup}, Error);
}
