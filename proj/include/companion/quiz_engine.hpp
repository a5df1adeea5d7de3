#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "companion/clock.hpp"
#include "companion/content_indexer.hpp"
#include "companion/error.hpp"
#include "companion/fuzzy_matcher.hpp"

namespace companion {

enum class Difficulty { Beginner, Intermediate, Advanced, Expert };

inline constexpr std::array kAllDifficulties = {Difficulty::Beginner, Difficulty::Intermediate,
                                                Difficulty::Advanced, Difficulty::Expert};

/// Lowercase wire name ("beginner", ...).
std::string_view difficulty_name(Difficulty level);
/// Case-insensitive inverse of difficulty_name(). Throws Errc::invalid_argument.
Difficulty parse_difficulty(std::string_view name);
/// The fixed system prompt that conditions every generation at this level.
std::string_view system_prompt(Difficulty level);

inline constexpr std::size_t kQuestionsPerQuiz = 3;
inline constexpr std::size_t kMinAnswers = 3;
inline constexpr std::size_t kMaxAnswers = 5;
inline constexpr double kDefaultPassThreshold = 0.67;

enum class QuestionRole { DirectRecall, DeeperUnderstanding };

struct AnswerOption {
    std::string text;
    bool correct = false;
    std::string explanation;
};

struct Question {
    std::string question_text;
    std::vector<AnswerOption> answers;
    std::size_t correct_index = 0;
    QuestionRole role = QuestionRole::DirectRecall;
};

struct Quiz {
    std::string quiz_id;
    std::string section_id;
    Difficulty difficulty = Difficulty::Beginner;
    std::vector<Question> questions;
};

class QuizParseError : public Error {
public:
    QuizParseError(Errc code, std::string path, const std::string& message)
        : Error(code, message + (path.empty() ? "" : " at " + path)), path_(std::move(path))
    {
    }

    /// JSON path of the offending field, e.g. "$.questions[1].answers".
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Extracts and validates the quiz object from model output. Code fences, surrounding
/// prose and trailing commas are tolerated; anything semantic throws QuizParseError.
/// More than three questions are trimmed to the first three.
Quiz parse_quiz_response(std::string_view raw);

nlohmann::json quiz_to_json(const Quiz& quiz);
/// Reads quiz_to_json() output, applying the same validation as parse_quiz_response().
Quiz quiz_from_json(const nlohmann::json& doc);

std::string build_quiz_prompt(std::string_view context, std::string_view section_name,
                              std::string_view section_number, Difficulty level);

std::string build_explanation_prompt(std::string_view highlight, std::span<const MatchResult> matches,
                                     const SectionIndex& chapter, Difficulty level);

/// Study-advice prompt carrying the learner's knowledge graph as JSON.
std::string build_advice_prompt(const nlohmann::json& graph, Difficulty level);

struct QuestionFeedback {
    std::size_t chosen_index = 0;
    std::size_t correct_index = 0;
    bool correct = false;
    std::vector<std::string> explanations; // one per answer option
};

struct QuizResult {
    std::string quiz_id;
    std::vector<bool> correctness;
    double score = 0.0;
    bool passed = false;
    TimePoint timestamp{};
    std::vector<QuestionFeedback> feedback;

    std::size_t correct_count() const;
};

/// Scores are compared in whole percent so that the default 0.67 admits 2 of 3.
bool meets_threshold(double score, double pass_threshold);

QuizResult grade_quiz(const Quiz& quiz, std::span<const long long> responses, double pass_threshold,
                      TimePoint timestamp);

nlohmann::json result_to_json(const QuizResult& result);
QuizResult result_from_json(const nlohmann::json& doc);

} // namespace companion
