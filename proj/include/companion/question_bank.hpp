#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "companion/journal.hpp"
#include "companion/quiz_engine.hpp"

namespace companion {

/// Stored quizzes per section at which generation starts mixing with reuse.
inline constexpr std::size_t kMixTrigger = 10;
inline constexpr std::size_t kDefaultCacheThreshold = 30;
inline constexpr double kMixedCacheProbability = 0.5;

enum class SourceMode { Generate, Mixed, CachedOnly };
enum class Vote { Up, Down };

std::string_view source_mode_name(SourceMode mode);
Vote parse_vote(std::string_view text);

struct StoredQuiz {
    Quiz quiz;
    std::size_t upvotes = 0;
    std::size_t served_count = 0;
    std::uint64_t last_served = 0; // serve sequence number, 0 = never served
};

struct SourceDecision {
    SourceMode mode = SourceMode::Generate;
    double serve_from_cache_probability = 0.0;
    bool use_cache = false;
    std::optional<std::string> quiz_id; // set when use_cache
};

/// Pool of validated quizzes for one section.
class SectionRepository {
public:
    explicit SectionRepository(std::string section_id);

    const std::string& section_id() const noexcept { return section_id_; }
    const std::vector<StoredQuiz>& stored() const noexcept { return stored_; }
    std::size_t size() const noexcept { return stored_.size(); }
    std::size_t generation_count() const noexcept { return generation_count_; }

    const StoredQuiz* find(std::string_view quiz_id) const;

    /// Throws Errc::duplicate_quiz_id for any id stored before, even if since discarded.
    void store_quiz(Quiz quiz);
    /// Down discards the quiz; Up tallies it and makes it eligible for the shared pool.
    void record_feedback(std::string_view quiz_id, Vote vote);
    void mark_served(std::string_view quiz_id);

    SourceMode mode(std::size_t cache_threshold) const;
    /// Never-served quizzes first (in storage order), then the oldest serve.
    const StoredQuiz* least_recently_served() const;
    std::vector<std::string> shared_pool_ids() const;

private:
    StoredQuiz* find_mut(std::string_view quiz_id);

    std::string section_id_;
    std::vector<StoredQuiz> stored_;
    std::set<std::string, std::less<>> ever_stored_;
    std::size_t generation_count_ = 0;
    std::uint64_t serve_clock_ = 0;
};

/// Generate below ten generated quizzes; CachedOnly at n stored; Mixed in between,
/// drawing the cache with probability 0.5. Throws Errc::invalid_argument unless n > 10.
SourceDecision next_quiz(const SectionRepository& repo, std::size_t cache_threshold, std::mt19937_64& rng);

/// All section repositories, each backed by a JSON-lines journal when a directory is given.
/// One writer per section at a time; sections are independent.
class QuestionBank {
public:
    explicit QuestionBank(std::optional<std::filesystem::path> directory = std::nullopt,
                          std::size_t cache_threshold = kDefaultCacheThreshold);

    std::size_t cache_threshold() const noexcept { return cache_threshold_; }

    SourceDecision decide(const std::string& section_id, std::mt19937_64& rng);
    /// Marks a cached quiz served and returns it.
    Quiz serve(const std::string& section_id, const std::string& quiz_id);
    void store(const Quiz& quiz);
    void feedback(const std::string& quiz_id, Vote vote);

    std::optional<Quiz> find_quiz(const std::string& quiz_id) const;
    SectionRepository repository(const std::string& section_id) const;
    /// Upvoted quizzes across all sections, ordered by quiz id.
    std::vector<Quiz> shared_pool() const;

private:
    struct Slot {
        explicit Slot(std::string section_id) : repo(std::move(section_id)) {}
        mutable std::mutex mutex;
        SectionRepository repo;
        std::optional<Journal> journal;
    };

    Slot& slot(const std::string& section_id);
    const Slot* find_slot(const std::string& section_id) const;
    std::optional<std::string> section_of(const std::string& quiz_id) const;
    void apply(SectionRepository& repo, const nlohmann::json& record);

    std::optional<std::filesystem::path> directory_;
    std::size_t cache_threshold_;
    mutable std::shared_mutex slots_mutex_;
    std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
    std::map<std::string, std::string, std::less<>> quiz_sections_;
};

} // namespace companion
