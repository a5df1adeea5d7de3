#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "companion/content_indexer.hpp"
#include "companion/journal.hpp"
#include "companion/quiz_engine.hpp"

namespace companion {

inline constexpr std::size_t kDefaultMissedCap = 100;
inline constexpr std::size_t kDefaultBadgeInterval = 5;

using DailyActivity = std::map<std::chrono::sys_days, std::uint64_t>;

struct KnowledgeNode {
    std::string section_id;
    std::string chapter_id;
    bool engaged = false;
    std::optional<double> best_score; // absent until the first attempt
    std::size_t pass_count = 0;
    std::vector<std::string> missed_question_texts; // newest last
};

struct LearnerState {
    std::string learner_id;
    Difficulty difficulty_preference = Difficulty::Beginner;
    std::map<std::string, KnowledgeNode, std::less<>> nodes;
    std::vector<QuizResult> attempts; // ordered by timestamp
    DailyActivity daily_activity;
};

struct LearnerSettings {
    std::chrono::minutes utc_offset{0};
    std::size_t missed_cap = kDefaultMissedCap;
};

/// Appends the attempt and updates the section's node and the day's activity count.
/// Throws Errc::unknown_section.
void record_attempt(LearnerState& state, const Corpus& corpus, const std::string& section_id, const QuizResult& result,
                    const std::vector<std::string>& missed, const LearnerSettings& settings = {});

/// Marks a section as visited. Throws Errc::unknown_section.
void record_visit(LearnerState& state, const Corpus& corpus, const std::string& section_id);

/// Consecutive active days ending today, or yesterday when today has no activity yet.
std::size_t compute_streak(const DailyActivity& activity, std::chrono::sys_days today);

/// floor(passing / c). Throws Errc::invalid_argument when c is 0.
std::size_t award_badges(std::size_t passing_attempts, std::size_t c);

/// Sections of the chapter whose best score passes, over required_sections, capped at 1.
/// Throws Errc::unknown_chapter, or Errc::invalid_argument when required_sections is 0.
double chapter_progress(const LearnerState& state, const Corpus& corpus, const std::string& chapter_id,
                        std::size_t required_sections, double pass_threshold);

struct GamificationSettings {
    std::size_t badge_interval = kDefaultBadgeInterval;
    std::optional<std::size_t> required_sections; // default: every section of the chapter
    double pass_threshold = kDefaultPassThreshold;
};

struct GamificationSnapshot {
    std::map<std::string, double> chapter_progress;
    std::size_t streak_days = 0;
    std::size_t passing_attempts = 0;
    std::size_t badge_count = 0;
    DailyActivity heatmap;

    bool operator==(const GamificationSnapshot&) const = default;
};

GamificationSnapshot snapshot(const LearnerState& state, const Corpus& corpus, const GamificationSettings& settings,
                              std::chrono::sys_days today);

nlohmann::json snapshot_to_json(const GamificationSnapshot& snap);

/// Chapter and section nodes in corpus order, with chapter-to-section edges.
nlohmann::json graph_snapshot(const LearnerState& state, const Corpus& corpus);

/// Learner states keyed by learner id, each backed by its own JSON-lines journal when a
/// directory is given. Journals are replayed lazily on first access.
class LearnerStore {
public:
    LearnerStore(const Corpus& corpus, std::optional<std::filesystem::path> directory, LearnerSettings settings = {});

    LearnerState state(const std::string& learner_id);

    void record_attempt(const std::string& learner_id, const std::string& section_id, const QuizResult& result,
                        const std::vector<std::string>& missed);
    void record_visit(const std::string& learner_id, const std::string& section_id);
    void set_difficulty(const std::string& learner_id, Difficulty level);

    const LearnerSettings& settings() const noexcept { return settings_; }

private:
    struct Slot {
        std::mutex mutex;
        LearnerState state;
        std::optional<Journal> journal;
    };

    Slot& slot(const std::string& learner_id);
    void apply(LearnerState& state, const nlohmann::json& record) const;

    const Corpus& corpus_;
    std::optional<std::filesystem::path> directory_;
    LearnerSettings settings_;
    std::shared_mutex slots_mutex_;
    std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
};

} // namespace companion
