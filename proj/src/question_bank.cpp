#include "companion/question_bank.hpp"

#include <algorithm>

namespace companion {

using nlohmann::json;

std::string_view source_mode_name(SourceMode mode)
{
    switch (mode) {
    case SourceMode::Generate: return "generate";
    case SourceMode::Mixed: return "mixed";
    case SourceMode::CachedOnly: return "cached_only";
    }
    return "generate";
}

Vote parse_vote(std::string_view text)
{
    if (text == "up")
        return Vote::Up;
    if (text == "down")
        return Vote::Down;
    throw Error(Errc::invalid_argument, "vote must be \"up\" or \"down\"");
}

SectionRepository::SectionRepository(std::string section_id) : section_id_(std::move(section_id)) {}

const StoredQuiz* SectionRepository::find(std::string_view quiz_id) const
{
    auto it = std::find_if(stored_.begin(), stored_.end(), [&](const StoredQuiz& s) { return s.quiz.quiz_id == quiz_id; });
    return it == stored_.end() ? nullptr : &*it;
}

StoredQuiz* SectionRepository::find_mut(std::string_view quiz_id)
{
    return const_cast<StoredQuiz*>(std::as_const(*this).find(quiz_id));
}

void SectionRepository::store_quiz(Quiz quiz)
{
    if (ever_stored_.count(quiz.quiz_id))
        throw Error(Errc::duplicate_quiz_id, "quiz '" + quiz.quiz_id + "' already stored");
    ever_stored_.insert(quiz.quiz_id);
    stored_.push_back(StoredQuiz{std::move(quiz)});
    ++generation_count_;
}

void SectionRepository::record_feedback(std::string_view quiz_id, Vote vote)
{
    auto* entry = find_mut(quiz_id);
    if (!entry)
        throw Error(Errc::unknown_quiz_id, "no stored quiz '" + std::string(quiz_id) + "'");
    if (vote == Vote::Up) {
        ++entry->upvotes;
        return;
    }
    stored_.erase(stored_.begin() + (entry - stored_.data()));
}

void SectionRepository::mark_served(std::string_view quiz_id)
{
    auto* entry = find_mut(quiz_id);
    if (!entry)
        throw Error(Errc::unknown_quiz_id, "no stored quiz '" + std::string(quiz_id) + "'");
    ++entry->served_count;
    entry->last_served = ++serve_clock_;
}

SourceMode SectionRepository::mode(std::size_t cache_threshold) const
{
    if (generation_count_ < kMixTrigger)
        return SourceMode::Generate;
    if (stored_.size() >= cache_threshold)
        return SourceMode::CachedOnly;
    if (stored_.size() >= kMixTrigger)
        return SourceMode::Mixed;
    // Downvotes shrank the pool below the mixing point.
    return SourceMode::Generate;
}

const StoredQuiz* SectionRepository::least_recently_served() const
{
    const StoredQuiz* best = nullptr;
    for (const auto& s : stored_)
        if (!best || s.last_served < best->last_served)
            best = &s;
    return best;
}

std::vector<std::string> SectionRepository::shared_pool_ids() const
{
    std::vector<std::string> ids;
    for (const auto& s : stored_)
        if (s.upvotes > 0)
            ids.push_back(s.quiz.quiz_id);
    return ids;
}

SourceDecision next_quiz(const SectionRepository& repo, std::size_t cache_threshold, std::mt19937_64& rng)
{
    if (cache_threshold <= kMixTrigger)
        throw Error(Errc::invalid_argument, "cache threshold n must exceed 10");

    SourceDecision d;
    d.mode = repo.mode(cache_threshold);
    switch (d.mode) {
    case SourceMode::Generate:
        break;
    case SourceMode::Mixed: {
        d.serve_from_cache_probability = kMixedCacheProbability;
        // 53-bit uniform draw; independent of the standard library's distributions.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        d.use_cache = u < kMixedCacheProbability;
        break;
    }
    case SourceMode::CachedOnly:
        d.serve_from_cache_probability = 1.0;
        d.use_cache = true;
        break;
    }
    if (d.use_cache)
        d.quiz_id = repo.least_recently_served()->quiz.quiz_id;
    return d;
}

QuestionBank::QuestionBank(std::optional<std::filesystem::path> directory, std::size_t cache_threshold)
    : directory_(std::move(directory)), cache_threshold_(cache_threshold)
{
    if (cache_threshold_ <= kMixTrigger)
        throw Error(Errc::config_error, "cache threshold n must exceed 10");
    if (!directory_ || !std::filesystem::exists(*directory_))
        return;

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(*directory_))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        Journal journal(file);
        journal.replay([&](const json& record) {
            const auto section_id = record.at("section_id").get<std::string>();
            auto& s = slot(section_id);
            apply(s.repo, record);
        });
    }
}

void QuestionBank::apply(SectionRepository& repo, const json& record)
{
    const auto op = record.at("op").get<std::string>();
    if (op == "store") {
        auto quiz = quiz_from_json(record.at("quiz"));
        quiz_sections_[quiz.quiz_id] = repo.section_id();
        repo.store_quiz(std::move(quiz));
    } else if (op == "serve") {
        repo.mark_served(record.at("quiz_id").get<std::string>());
    } else if (op == "vote") {
        repo.record_feedback(record.at("quiz_id").get<std::string>(), parse_vote(record.at("vote").get<std::string>()));
    } else {
        throw Error(Errc::io_error, "unknown question bank record '" + op + "'");
    }
}

QuestionBank::Slot& QuestionBank::slot(const std::string& section_id)
{
    {
        std::shared_lock lock(slots_mutex_);
        auto it = slots_.find(section_id);
        if (it != slots_.end())
            return *it->second;
    }
    std::unique_lock lock(slots_mutex_);
    auto& entry = slots_[section_id];
    if (!entry) {
        entry = std::make_unique<Slot>(section_id);
        if (directory_)
            entry->journal.emplace(*directory_ / (file_safe(section_id) + ".jsonl"));
    }
    return *entry;
}

const QuestionBank::Slot* QuestionBank::find_slot(const std::string& section_id) const
{
    std::shared_lock lock(slots_mutex_);
    auto it = slots_.find(section_id);
    return it == slots_.end() ? nullptr : it->second.get();
}

std::optional<std::string> QuestionBank::section_of(const std::string& quiz_id) const
{
    std::shared_lock lock(slots_mutex_);
    auto it = quiz_sections_.find(quiz_id);
    if (it == quiz_sections_.end())
        return std::nullopt;
    return it->second;
}

SourceDecision QuestionBank::decide(const std::string& section_id, std::mt19937_64& rng)
{
    auto& s = slot(section_id);
    std::lock_guard lock(s.mutex);
    return next_quiz(s.repo, cache_threshold_, rng);
}

Quiz QuestionBank::serve(const std::string& section_id, const std::string& quiz_id)
{
    auto& s = slot(section_id);
    std::lock_guard lock(s.mutex);
    s.repo.mark_served(quiz_id);
    if (s.journal)
        s.journal->append({{"op", "serve"}, {"section_id", section_id}, {"quiz_id", quiz_id}});
    return s.repo.find(quiz_id)->quiz;
}

void QuestionBank::store(const Quiz& quiz)
{
    auto& s = slot(quiz.section_id);
    {
        std::lock_guard lock(s.mutex);
        s.repo.store_quiz(quiz);
        if (s.journal)
            s.journal->append({{"op", "store"}, {"section_id", quiz.section_id}, {"quiz", quiz_to_json(quiz)}});
    }
    std::unique_lock lock(slots_mutex_);
    quiz_sections_[quiz.quiz_id] = quiz.section_id;
}

void QuestionBank::feedback(const std::string& quiz_id, Vote vote)
{
    const auto section_id = section_of(quiz_id);
    if (!section_id)
        throw Error(Errc::unknown_quiz_id, "no stored quiz '" + quiz_id + "'");
    auto& s = slot(*section_id);
    std::lock_guard lock(s.mutex);
    s.repo.record_feedback(quiz_id, vote);
    if (s.journal)
        s.journal->append({{"op", "vote"},
                           {"section_id", *section_id},
                           {"quiz_id", quiz_id},
                           {"vote", vote == Vote::Up ? "up" : "down"}});
}

std::optional<Quiz> QuestionBank::find_quiz(const std::string& quiz_id) const
{
    const auto section_id = section_of(quiz_id);
    if (!section_id)
        return std::nullopt;
    const auto* s = find_slot(*section_id);
    if (!s)
        return std::nullopt;
    std::lock_guard lock(s->mutex);
    const auto* stored = s->repo.find(quiz_id);
    if (!stored)
        return std::nullopt;
    return stored->quiz;
}

SectionRepository QuestionBank::repository(const std::string& section_id) const
{
    const auto* s = find_slot(section_id);
    if (!s)
        return SectionRepository(section_id);
    std::lock_guard lock(s->mutex);
    return s->repo;
}

std::vector<Quiz> QuestionBank::shared_pool() const
{
    std::vector<Quiz> pool;
    std::shared_lock lock(slots_mutex_);
    for (const auto& [id, s] : slots_) {
        std::lock_guard slot_lock(s->mutex);
        for (const auto& stored : s->repo.stored())
            if (stored.upvotes > 0)
                pool.push_back(stored.quiz);
    }
    std::sort(pool.begin(), pool.end(), [](const Quiz& a, const Quiz& b) { return a.quiz_id < b.quiz_id; });
    return pool;
}

} // namespace companion
