#include "doctest.h"

#include <random>

#include "companion/content_indexer.hpp"
#include "companion/fuzzy_matcher.hpp"
#include "companion/quiz_engine.hpp"
#include "test_support.hpp"

using namespace companion;

namespace {

bool schema_valid(const Quiz& q)
{
    if (q.questions.size() != 3)
        return false;
    for (const auto& question : q.questions) {
        if (question.question_text.empty() || question.answers.size() < 3 || question.answers.size() > 5)
            return false;
        int correct = 0;
        for (const auto& a : question.answers) {
            if (a.text.empty() || a.explanation.empty())
                return false;
            correct += a.correct;
        }
        if (correct != 1 || !question.answers[question.correct_index].correct)
            return false;
    }
    return true;
}

Errc parse_error_code(const std::string& raw)
{
    try {
        parse_quiz_response(raw);
    } catch (const QuizParseError& e) {
        return e.code();
    }
    FAIL("expected QuizParseError");
    return Errc::invalid_argument;
}

} // namespace

TEST_CASE("difficulty names round-trip")
{
    for (auto level : kAllDifficulties)
        CHECK(parse_difficulty(difficulty_name(level)) == level);
    CHECK(parse_difficulty("EXPERT") == Difficulty::Expert);
    CHECK_THROWS_AS(parse_difficulty("genius"), Error);
}

TEST_CASE("system prompts carry the level anchors")
{
    CHECK(system_prompt(Difficulty::Beginner).find("You are conversing with a Beginner learner") == 0);
    CHECK(system_prompt(Difficulty::Intermediate).find("an Intermediate learner") != std::string_view::npos);
    CHECK(system_prompt(Difficulty::Advanced).find("an Advanced learner") != std::string_view::npos);
    CHECK(system_prompt(Difficulty::Expert).find("Bloom's Taxonomy") != std::string_view::npos);
    CHECK(system_prompt(Difficulty::Expert).find("remember, understand, apply, analyze, evaluate, and create") !=
          std::string_view::npos);
}

TEST_CASE("quiz prompt layout")
{
    const auto p = build_quiz_prompt("Quoted text.", "Model Training", "3", Difficulty::Advanced);
    CHECK(p.find(system_prompt(Difficulty::Advanced)) == 0);
    CHECK(p.find("Create a quiz from a CHAPTER SECTION.\n") != std::string::npos);
    CHECK(p.find("- Q1 & Q2: Directly related to the quote's content.\n") != std::string::npos);
    CHECK(p.find("- Q3: Requires deeper understanding.\n") != std::string::npos);
    CHECK(p.find("QUOTE: Quoted text.\nCHAPTER SECTION Model Training 3\n") != std::string::npos);
    CHECK(p.back() == '\n');
    CHECK_THROWS_AS(build_quiz_prompt("   ", "x", "1", Difficulty::Beginner), Error);
}

TEST_CASE("explanation prompt cites matches or says nothing matched")
{
    const auto idx = index_document("# Chapter\n\nGradient descent updates weights.\n\nOther text.\n", "c",
                                    MarkupFormat::Markdown);
    const auto matches = match_top_k("gradient descent updates weights", idx, 1);
    const auto p = build_explanation_prompt("gradient descent", matches, idx, Difficulty::Expert);
    CHECK(p.find(system_prompt(Difficulty::Expert)) == 0);
    CHECK(p.find("[c/s0001/p0001] Gradient descent updates weights.") != std::string::npos);
    CHECK(p.find("HIGHLIGHT: gradient descent\n") != std::string::npos);

    const auto none = build_explanation_prompt("x", {}, idx, Difficulty::Beginner);
    CHECK(none.find("No matching source context") != std::string::npos);
    CHECK(none.find("\"Chapter\"") != std::string::npos);
    CHECK_THROWS_AS(build_explanation_prompt("", matches, idx, Difficulty::Beginner), Error);
}

TEST_CASE("advice prompt embeds the graph")
{
    nlohmann::json graph = {{"nodes", nlohmann::json::array()}};
    const auto p = build_advice_prompt(graph, Difficulty::Intermediate);
    CHECK(p.find("KNOWLEDGE GRAPH: {\"nodes\":[]}") != std::string::npos);
}

TEST_CASE("parse a clean answer")
{
    const auto q = parse_quiz_response(testsupport::quiz_answer("t"));
    REQUIRE(schema_valid(q));
    CHECK(q.questions[0].correct_index == 0);
    CHECK(q.questions[2].correct_index == 2);
    CHECK(q.questions[0].role == QuestionRole::DirectRecall);
    CHECK(q.questions[2].role == QuestionRole::DeeperUnderstanding);
}

TEST_CASE("parse tolerates fences, prose and trailing commas")
{
    const auto body = testsupport::quiz_answer("t");
    CHECK(schema_valid(parse_quiz_response("Here is your quiz:\n```json\n" + body + "\n```\nGood luck!")));
    std::string trailing = body;
    trailing.insert(trailing.rfind(']'), ",");
    CHECK(schema_valid(parse_quiz_response(trailing)));
    CHECK(schema_valid(parse_quiz_response("{\"note\": 1} then " + body)));
}

TEST_CASE("parse trims extra questions")
{
    auto doc = nlohmann::json::parse(testsupport::quiz_answer("t"));
    doc["questions"].push_back(doc["questions"][0]);
    const auto q = parse_quiz_response(doc.dump());
    CHECK(q.questions.size() == 3);
}

TEST_CASE("structured parse errors")
{
    CHECK(parse_error_code("no json at all") == Errc::no_json_found);
    CHECK(parse_error_code("{\"other\": 1}") == Errc::schema_violation);

    auto doc = nlohmann::json::parse(testsupport::quiz_answer("t"));
    auto two = doc;
    two["questions"].erase(2);
    CHECK(parse_error_code(two.dump()) == Errc::wrong_question_count);

    auto ambiguous = doc;
    ambiguous["questions"][1]["answers"][3]["correct"] = true;
    CHECK(parse_error_code(ambiguous.dump()) == Errc::ambiguous_correct_answer);

    auto none = doc;
    none["questions"][0]["answers"][0]["correct"] = false;
    CHECK(parse_error_code(none.dump()) == Errc::ambiguous_correct_answer);

    auto blank = doc;
    blank["questions"][0]["answers"][1]["explanation"] = "  ";
    CHECK(parse_error_code(blank.dump()) == Errc::schema_violation);

    auto few = doc;
    few["questions"][0]["answers"].erase(0);
    few["questions"][0]["answers"].erase(0);
    CHECK(parse_error_code(few.dump()) == Errc::schema_violation);

    try {
        parse_quiz_response(blank.dump());
    } catch (const QuizParseError& e) {
        CHECK(e.path() == "$.questions[0].answers[1].explanation");
    }
}

TEST_CASE("mutated answers never admit an invalid quiz")
{
    const auto base = testsupport::quiz_answer("m", 3);
    std::mt19937_64 rng(4242);
    const std::string alphabet = "{}[]\",:truefalsn \n";
    int admitted = 0;
    for (int i = 0; i < 2000; ++i) {
        auto s = base;
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits && !s.empty(); ++e) {
            const auto pos = rng() % s.size();
            switch (rng() % 3) {
            case 0: s[pos] = alphabet[rng() % alphabet.size()]; break;
            case 1: s.erase(pos, 1 + rng() % 8); break;
            default: s.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
            }
        }
        try {
            const auto q = parse_quiz_response(s);
            REQUIRE(schema_valid(q));
            ++admitted;
        } catch (const QuizParseError&) {
        }
    }
    CHECK(admitted > 0);
}

TEST_CASE("quiz json round-trips")
{
    auto q = parse_quiz_response(testsupport::quiz_answer("r", 5));
    q.quiz_id = "c/s0001/q0001";
    q.section_id = "c/s0001";
    q.difficulty = Difficulty::Expert;
    const auto back = quiz_from_json(quiz_to_json(q));
    CHECK(quiz_to_json(back) == quiz_to_json(q));
    CHECK(back.difficulty == Difficulty::Expert);
}

TEST_CASE("threshold compares whole percents")
{
    CHECK(meets_threshold(2.0 / 3.0, 0.67));
    CHECK_FALSE(meets_threshold(1.0 / 3.0, 0.67));
    CHECK(meets_threshold(1.0, 1.0));
    CHECK_FALSE(meets_threshold(0.66, 0.67));
    CHECK(meets_threshold(0.67, 0.67));
}

TEST_CASE("grading")
{
    auto q = parse_quiz_response(testsupport::quiz_answer("g"));
    q.quiz_id = "c/s0001/q0001";
    const auto t = testsupport::at(2026, 3, 1);

    const std::vector<long long> all_right{0, 1, 2};
    auto r = grade_quiz(q, all_right, 0.67, t);
    CHECK(r.score == 1.0);
    CHECK(r.passed);
    CHECK(r.correct_count() == 3);
    CHECK(r.feedback[1].explanations.size() == 4);
    CHECK(r.timestamp == t);

    const std::vector<long long> two_right{0, 1, 0};
    r = grade_quiz(q, two_right, 0.67, t);
    CHECK(r.passed);
    CHECK(r.correctness == std::vector<bool>{true, true, false});
    CHECK(r.feedback[2].correct_index == 2);

    const std::vector<long long> one_right{0, 0, 0};
    CHECK_FALSE(grade_quiz(q, one_right, 0.67, t).passed);

    const std::vector<long long> short_list{0, 1};
    CHECK_THROWS_AS(grade_quiz(q, short_list, 0.67, t), Error);
    const std::vector<long long> out_of_range{0, 1, 9};
    CHECK_THROWS_AS(grade_quiz(q, out_of_range, 0.67, t), Error);
    const std::vector<long long> negative{0, -1, 2};
    CHECK_THROWS_AS(grade_quiz(q, negative, 0.67, t), Error);

    const auto back = result_from_json(result_to_json(r));
    CHECK(result_to_json(back) == result_to_json(r));
}
