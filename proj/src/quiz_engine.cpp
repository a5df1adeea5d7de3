#include "companion/quiz_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace companion {

using nlohmann::json;

namespace {

constexpr std::string_view kBeginnerPrompt =
    "You are conversing with a Beginner learner: Focus on foundational concepts, definitions, and "
    "straightforward applications in machine learning systems, suitable for learners with little to no "
    "prior knowledge.";
constexpr std::string_view kIntermediatePrompt =
    "You are conversing with an Intermediate learner: Emphasize problem-solving, system design, and "
    "practical implementations, targeting learners with a basic understanding of machine learning "
    "principles.";
constexpr std::string_view kAdvancedPrompt =
    "You are conversing with an Advanced learner: Challenge learners to analyze, innovate, and optimize "
    "complex machine learning systems, requiring deep expertise and a holistic grasp of advanced "
    "techniques.";
constexpr std::string_view kExpertPrompt =
    "You are an expert ML teacher using Bloom's Taxonomy: Create responses that progress through Bloom's "
    "levels: remember, understand, apply, analyze, evaluate, and create. Guide my learning.";

constexpr std::string_view kQuizTemplate =
    "Create a quiz from a CHAPTER SECTION.\n"
    "The quiz should have 3 questions in JSON format:\n"
    "- Q1 & Q2: Directly related to the quote's content.\n"
    "- Q3: Requires deeper understanding.\n"
    "Use this JSON template, modifying it as needed:\n"
    "{\"questions\": [\n"
    "    {\"question\": \"Q1 here?\",\n"
    "      \"answers\": [\n"
    "        {\"text\": \"A1\", \"correct\": true/false, \n"
    "        \"explanation\": \"explanation\"},\n"
    "        {\"text\": \"A2\", \"correct\": false, \n"
    "        \"explanation\": \"explanation\"},\n"
    "        {\"text\": \"A3\", \"correct\": false, \n"
    "        \"explanation\": \"explanation\"},\n"
    "      ]},\n"
    "    {\"question\": \"Q2 here?\", \"answers\": [/* options */]},\n"
    "    {\"question\": \"Q3 here?\", \"answers\": [/* options */]}\n"
    "  ]}\n";

std::string path_of(std::size_t question)
{
    return "$.questions[" + std::to_string(question) + "]";
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what)
{
    throw QuizParseError(Errc::schema_violation, path, what);
}

std::string required_text(const json& obj, const char* key, const std::string& path)
{
    const std::string field = path + "." + key;
    auto it = obj.find(key);
    if (it == obj.end())
        schema_error(field, "missing field");
    if (!it->is_string())
        schema_error(field, "expected a string");
    auto value = it->get<std::string>();
    if (std::all_of(value.begin(), value.end(), [](unsigned char c) { return std::isspace(c); }))
        schema_error(field, "empty text");
    return value;
}

Question parse_question(const json& q, std::size_t index)
{
    const auto path = path_of(index);
    if (!q.is_object())
        schema_error(path, "expected an object");

    Question out;
    out.question_text = required_text(q, "question", path);
    out.role = index < 2 ? QuestionRole::DirectRecall : QuestionRole::DeeperUnderstanding;

    auto answers = q.find("answers");
    if (answers == q.end() || !answers->is_array())
        schema_error(path + ".answers", "expected an array");
    if (answers->size() < kMinAnswers || answers->size() > kMaxAnswers)
        schema_error(path + ".answers", "expected 3 to 5 answer options, got " + std::to_string(answers->size()));

    std::size_t correct = 0;
    for (std::size_t a = 0; a < answers->size(); ++a) {
        const auto& ans = (*answers)[a];
        const auto apath = path + ".answers[" + std::to_string(a) + "]";
        if (!ans.is_object())
            schema_error(apath, "expected an object");
        AnswerOption opt;
        opt.text = required_text(ans, "text", apath);
        auto flag = ans.find("correct");
        if (flag == ans.end() || !flag->is_boolean())
            schema_error(apath + ".correct", "expected a boolean");
        opt.correct = flag->get<bool>();
        opt.explanation = required_text(ans, "explanation", apath);
        if (opt.correct) {
            ++correct;
            out.correct_index = a;
        }
        out.answers.push_back(std::move(opt));
    }
    if (correct != 1)
        throw QuizParseError(Errc::ambiguous_correct_answer, path,
                             std::to_string(correct) + " answers marked correct");
    return out;
}

std::vector<Question> parse_questions(const json& doc)
{
    if (!doc.is_object())
        schema_error("$", "expected an object");
    auto qs = doc.find("questions");
    if (qs == doc.end() || !qs->is_array())
        schema_error("$.questions", "expected an array");
    if (qs->size() < kQuestionsPerQuiz)
        throw QuizParseError(Errc::wrong_question_count, "$.questions",
                             "expected 3 questions, got " + std::to_string(qs->size()));

    std::vector<Question> out;
    for (std::size_t i = 0; i < kQuestionsPerQuiz; ++i)
        out.push_back(parse_question((*qs)[i], i));
    return out;
}

// Index one past the '}' that closes the object opened at `open`, or npos.
std::size_t object_end(std::string_view s, std::size_t open)
{
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{' || c == '[')
            ++depth;
        else if ((c == '}' || c == ']') && --depth == 0)
            return c == '}' ? i + 1 : std::string_view::npos;
    }
    return std::string_view::npos;
}

// Drops commas that directly precede a closing bracket, outside strings.
std::string strip_trailing_commas(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            out.push_back(c);
            if (c == '\\' && i + 1 < s.size())
                out.push_back(s[++i]);
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        if (c == ',') {
            auto next = s.find_first_not_of(" \t\r\n", i + 1);
            if (next != std::string_view::npos && (s[next] == ']' || s[next] == '}'))
                continue;
        }
        out.push_back(c);
    }
    return out;
}

std::optional<json> try_parse(std::string_view candidate)
{
    auto doc = json::parse(candidate, nullptr, false);
    if (doc.is_discarded())
        doc = json::parse(strip_trailing_commas(candidate), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        return std::nullopt;
    return doc;
}

} // namespace

std::string_view difficulty_name(Difficulty level)
{
    switch (level) {
    case Difficulty::Beginner: return "beginner";
    case Difficulty::Intermediate: return "intermediate";
    case Difficulty::Advanced: return "advanced";
    case Difficulty::Expert: return "expert";
    }
    return "beginner";
}

Difficulty parse_difficulty(std::string_view name)
{
    std::string lowered(name);
    for (auto& c : lowered)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (auto level : kAllDifficulties)
        if (difficulty_name(level) == lowered)
            return level;
    throw Error(Errc::invalid_argument, "unknown difficulty '" + std::string(name) + "'");
}

std::string_view system_prompt(Difficulty level)
{
    switch (level) {
    case Difficulty::Beginner: return kBeginnerPrompt;
    case Difficulty::Intermediate: return kIntermediatePrompt;
    case Difficulty::Advanced: return kAdvancedPrompt;
    case Difficulty::Expert: return kExpertPrompt;
    }
    return kBeginnerPrompt;
}

Quiz parse_quiz_response(std::string_view raw)
{
    std::optional<json> fallback;
    for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
        const auto end = object_end(raw, open);
        if (end == std::string_view::npos)
            continue;
        auto doc = try_parse(raw.substr(open, end - open));
        if (!doc)
            continue;
        if (doc->contains("questions")) {
            Quiz quiz;
            quiz.questions = parse_questions(*doc);
            return quiz;
        }
        if (!fallback)
            fallback = std::move(doc);
    }
    if (fallback)
        schema_error("$.questions", "missing field");
    throw QuizParseError(Errc::no_json_found, "", "no JSON object in model output");
}

json quiz_to_json(const Quiz& quiz)
{
    json questions = json::array();
    for (const auto& q : quiz.questions) {
        json answers = json::array();
        for (const auto& a : q.answers)
            answers.push_back({{"text", a.text}, {"correct", a.correct}, {"explanation", a.explanation}});
        questions.push_back({{"question", q.question_text}, {"answers", std::move(answers)}});
    }
    return {{"quiz_id", quiz.quiz_id},
            {"section_id", quiz.section_id},
            {"difficulty", difficulty_name(quiz.difficulty)},
            {"questions", std::move(questions)}};
}

Quiz quiz_from_json(const json& doc)
{
    Quiz quiz;
    quiz.questions = parse_questions(doc);
    if (doc["questions"].size() != kQuestionsPerQuiz)
        throw QuizParseError(Errc::wrong_question_count, "$.questions", "stored quiz must hold exactly 3 questions");
    try {
        quiz.quiz_id = doc.at("quiz_id").get<std::string>();
        quiz.section_id = doc.at("section_id").get<std::string>();
        quiz.difficulty = parse_difficulty(doc.at("difficulty").get<std::string>());
    } catch (const json::exception& e) {
        throw QuizParseError(Errc::schema_violation, "$", e.what());
    }
    return quiz;
}

std::string build_quiz_prompt(std::string_view context, std::string_view section_name,
                              std::string_view section_number, Difficulty level)
{
    if (context.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw Error(Errc::empty_context, "quiz context is empty");

    std::string prompt(system_prompt(level));
    prompt += "\n\n";
    prompt += kQuizTemplate;
    prompt += "QUOTE: ";
    prompt += context;
    prompt += "\nCHAPTER SECTION ";
    prompt += section_name;
    if (!section_number.empty()) {
        prompt += ' ';
        prompt += section_number;
    }
    prompt += '\n';
    return prompt;
}

std::string build_explanation_prompt(std::string_view highlight, std::span<const MatchResult> matches,
                                     const SectionIndex& chapter, Difficulty level)
{
    if (highlight.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw Error(Errc::empty_query, "highlight is empty");

    std::string prompt(system_prompt(level));
    prompt += "\n\n";

    std::size_t included = 0;
    std::string excerpts;
    for (const auto& m : matches) {
        const auto* p = chapter.find_paragraph(m.paragraph_id);
        if (!p)
            continue;
        excerpts += "[" + p->paragraph_id + "] " + p->raw_text + "\n";
        ++included;
    }

    if (included > 0) {
        prompt += "Explain the highlighted text to the learner. Base the answer primarily on the textbook "
                  "excerpts below. Bring in outside knowledge only to connect or clarify them, and say "
                  "when you do.\n\n";
        prompt += "TEXTBOOK EXCERPTS:\n";
        prompt += excerpts;
    } else {
        prompt += "No matching source context was found in the textbook. Keep the answer within the scope "
                  "of the chapter \"" + chapter.title() + "\" and say that it is not drawn from the text.\n";
    }
    prompt += "\nHIGHLIGHT: ";
    prompt += highlight;
    prompt += '\n';
    return prompt;
}

std::string build_advice_prompt(const json& graph, Difficulty level)
{
    std::string prompt(system_prompt(level));
    prompt += "\n\nHere is my knowledge graph of the textbook: chapters, sections, whether I engaged with "
              "each section, and my best quiz score. Suggest what I should study next and why.\n\n";
    prompt += "KNOWLEDGE GRAPH: ";
    prompt += graph.dump();
    prompt += '\n';
    return prompt;
}

std::size_t QuizResult::correct_count() const
{
    return static_cast<std::size_t>(std::count(correctness.begin(), correctness.end(), true));
}

bool meets_threshold(double score, double pass_threshold)
{
    return std::lround(score * 100.0) >= std::lround(pass_threshold * 100.0);
}

QuizResult grade_quiz(const Quiz& quiz, std::span<const long long> responses, double pass_threshold,
                      TimePoint timestamp)
{
    if (responses.size() != quiz.questions.size())
        throw Error(Errc::wrong_response_count, "expected " + std::to_string(quiz.questions.size()) +
                                                    " responses, got " + std::to_string(responses.size()));
    QuizResult result;
    result.quiz_id = quiz.quiz_id;
    result.timestamp = timestamp;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& q = quiz.questions[i];
        if (responses[i] < 0 || static_cast<std::size_t>(responses[i]) >= q.answers.size())
            throw Error(Errc::index_out_of_range, "response " + std::to_string(responses[i]) +
                                                      " out of range for question " + std::to_string(i + 1));
        QuestionFeedback fb;
        fb.chosen_index = static_cast<std::size_t>(responses[i]);
        fb.correct_index = q.correct_index;
        fb.correct = fb.chosen_index == q.correct_index;
        for (const auto& a : q.answers)
            fb.explanations.push_back(a.explanation);
        result.correctness.push_back(fb.correct);
        result.feedback.push_back(std::move(fb));
    }
    result.score = static_cast<double>(result.correct_count()) / static_cast<double>(quiz.questions.size());
    result.passed = meets_threshold(result.score, pass_threshold);
    return result;
}

json result_to_json(const QuizResult& result)
{
    json feedback = json::array();
    for (const auto& fb : result.feedback)
        feedback.push_back({{"chosen_index", fb.chosen_index},
                            {"correct_index", fb.correct_index},
                            {"correct", fb.correct},
                            {"explanations", fb.explanations}});
    return {{"quiz_id", result.quiz_id},
            {"correctness", result.correctness},
            {"score", result.score},
            {"passed", result.passed},
            {"timestamp", to_iso8601(result.timestamp)},
            {"feedback", std::move(feedback)}};
}

QuizResult result_from_json(const json& doc)
{
    try {
        QuizResult r;
        r.quiz_id = doc.at("quiz_id").get<std::string>();
        r.correctness = doc.at("correctness").get<std::vector<bool>>();
        r.score = doc.at("score").get<double>();
        r.passed = doc.at("passed").get<bool>();
        r.timestamp = parse_iso8601(doc.at("timestamp").get<std::string>());
        for (const auto& fb : doc.at("feedback")) {
            QuestionFeedback f;
            f.chosen_index = fb.at("chosen_index").get<std::size_t>();
            f.correct_index = fb.at("correct_index").get<std::size_t>();
            f.correct = fb.at("correct").get<bool>();
            f.explanations = fb.at("explanations").get<std::vector<std::string>>();
            r.feedback.push_back(std::move(f));
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(Errc::io_error, std::string("invalid quiz result: ") + e.what());
    }
}

} // namespace companion
