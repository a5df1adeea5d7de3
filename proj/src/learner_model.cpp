#include "companion/learner_model.hpp"

#include <algorithm>

namespace companion {

using nlohmann::json;

namespace {

const Section& require_section(const Corpus& corpus, const std::string& section_id)
{
    const auto* section = corpus.find_section(section_id);
    if (!section)
        throw Error(Errc::unknown_section, "unknown section '" + section_id + "'");
    return *section;
}

KnowledgeNode& node_for(LearnerState& state, const Section& section)
{
    auto [it, inserted] = state.nodes.try_emplace(section.section_id);
    if (inserted) {
        it->second.section_id = section.section_id;
        it->second.chapter_id = section.chapter_id;
    }
    return it->second;
}

} // namespace

void record_attempt(LearnerState& state, const Corpus& corpus, const std::string& section_id, const QuizResult& result,
                    const std::vector<std::string>& missed, const LearnerSettings& settings)
{
    const auto& section = require_section(corpus, section_id);
    auto& node = node_for(state, section);

    node.engaged = true;
    node.best_score = std::max(node.best_score.value_or(result.score), result.score);
    if (result.passed)
        ++node.pass_count;
    node.missed_question_texts.insert(node.missed_question_texts.end(), missed.begin(), missed.end());
    if (node.missed_question_texts.size() > settings.missed_cap) {
        const auto excess = node.missed_question_texts.size() - settings.missed_cap;
        node.missed_question_texts.erase(node.missed_question_texts.begin(),
                                         node.missed_question_texts.begin() + static_cast<std::ptrdiff_t>(excess));
    }

    auto pos = std::upper_bound(state.attempts.begin(), state.attempts.end(), result.timestamp,
                                [](TimePoint t, const QuizResult& r) { return t < r.timestamp; });
    state.attempts.insert(pos, result);
    ++state.daily_activity[local_day(result.timestamp, settings.utc_offset)];
}

void record_visit(LearnerState& state, const Corpus& corpus, const std::string& section_id)
{
    node_for(state, require_section(corpus, section_id)).engaged = true;
}

std::size_t compute_streak(const DailyActivity& activity, std::chrono::sys_days today)
{
    auto active = [&](std::chrono::sys_days d) {
        auto it = activity.find(d);
        return it != activity.end() && it->second > 0;
    };
    auto day = active(today) ? today : today - std::chrono::days(1);
    std::size_t run = 0;
    while (active(day)) {
        ++run;
        day -= std::chrono::days(1);
    }
    return run;
}

std::size_t award_badges(std::size_t passing_attempts, std::size_t c)
{
    if (c == 0)
        throw Error(Errc::invalid_argument, "badge interval must be at least 1");
    return passing_attempts / c;
}

double chapter_progress(const LearnerState& state, const Corpus& corpus, const std::string& chapter_id,
                        std::size_t required_sections, double pass_threshold)
{
    if (!corpus.find_chapter(chapter_id))
        throw Error(Errc::unknown_chapter, "unknown chapter '" + chapter_id + "'");
    if (required_sections == 0)
        throw Error(Errc::invalid_argument, "required sections must be at least 1");
    std::size_t passed = 0;
    for (const auto& [id, node] : state.nodes)
        if (node.chapter_id == chapter_id && node.best_score && meets_threshold(*node.best_score, pass_threshold))
            ++passed;
    return std::min(1.0, static_cast<double>(passed) / static_cast<double>(required_sections));
}

GamificationSnapshot snapshot(const LearnerState& state, const Corpus& corpus, const GamificationSettings& settings,
                              std::chrono::sys_days today)
{
    GamificationSnapshot snap;
    for (const auto& chapter : corpus.chapters()) {
        const auto required = settings.required_sections.value_or(std::max<std::size_t>(1, chapter.sections().size()));
        snap.chapter_progress[chapter.chapter_id()] =
            chapter_progress(state, corpus, chapter.chapter_id(), required, settings.pass_threshold);
    }
    snap.streak_days = compute_streak(state.daily_activity, today);
    snap.passing_attempts = static_cast<std::size_t>(
        std::count_if(state.attempts.begin(), state.attempts.end(), [](const QuizResult& r) { return r.passed; }));
    snap.badge_count = award_badges(snap.passing_attempts, settings.badge_interval);
    snap.heatmap = state.daily_activity;
    return snap;
}

json snapshot_to_json(const GamificationSnapshot& snap)
{
    json heatmap = json::object();
    for (const auto& [day, count] : snap.heatmap)
        heatmap[format_date(day)] = count;
    json progress = json::object();
    for (const auto& [chapter, value] : snap.chapter_progress)
        progress[chapter] = value;
    return {{"chapter_progress", std::move(progress)},
            {"streak_days", snap.streak_days},
            {"passing_attempts", snap.passing_attempts},
            {"badge_count", snap.badge_count},
            {"heatmap", std::move(heatmap)}};
}

json graph_snapshot(const LearnerState& state, const Corpus& corpus)
{
    json nodes = json::array();
    json edges = json::array();
    for (const auto& chapter : corpus.chapters()) {
        nodes.push_back({{"id", chapter.chapter_id()}, {"kind", "chapter"}, {"title", chapter.title()}});
        for (const auto& section : chapter.sections()) {
            json node = {{"id", section.section_id},
                         {"kind", "section"},
                         {"chapter_id", chapter.chapter_id()},
                         {"title", section.title},
                         {"engaged", false},
                         {"best_score", nullptr},
                         {"pass_count", 0},
                         {"passed", false}};
            if (auto it = state.nodes.find(section.section_id); it != state.nodes.end()) {
                node["engaged"] = it->second.engaged;
                if (it->second.best_score)
                    node["best_score"] = *it->second.best_score;
                node["pass_count"] = it->second.pass_count;
                node["passed"] = it->second.pass_count > 0;
            }
            nodes.push_back(std::move(node));
            edges.push_back({{"from", chapter.chapter_id()}, {"to", section.section_id}});
        }
    }
    return {{"learner_id", state.learner_id}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

LearnerStore::LearnerStore(const Corpus& corpus, std::optional<std::filesystem::path> directory,
                           LearnerSettings settings)
    : corpus_(corpus), directory_(std::move(directory)), settings_(settings)
{
}

LearnerStore::Slot& LearnerStore::slot(const std::string& learner_id)
{
    {
        std::shared_lock lock(slots_mutex_);
        auto it = slots_.find(learner_id);
        if (it != slots_.end())
            return *it->second;
    }
    std::unique_lock lock(slots_mutex_);
    auto& entry = slots_[learner_id];
    if (!entry) {
        auto fresh = std::make_unique<Slot>();
        fresh->state.learner_id = learner_id;
        if (directory_) {
            fresh->journal.emplace(*directory_ / (file_safe(learner_id) + ".jsonl"));
            fresh->journal->replay([&](const json& record) { apply(fresh->state, record); });
        }
        entry = std::move(fresh);
    }
    return *entry;
}

void LearnerStore::apply(LearnerState& state, const json& record) const
{
    const auto op = record.at("op").get<std::string>();
    if (op == "attempt") {
        companion::record_attempt(state, corpus_, record.at("section_id").get<std::string>(),
                                  result_from_json(record.at("result")),
                                  record.at("missed").get<std::vector<std::string>>(), settings_);
    } else if (op == "visit") {
        companion::record_visit(state, corpus_, record.at("section_id").get<std::string>());
    } else if (op == "difficulty") {
        state.difficulty_preference = parse_difficulty(record.at("level").get<std::string>());
    } else {
        throw Error(Errc::io_error, "unknown learner record '" + op + "'");
    }
}

LearnerState LearnerStore::state(const std::string& learner_id)
{
    auto& s = slot(learner_id);
    std::lock_guard lock(s.mutex);
    return s.state;
}

void LearnerStore::record_attempt(const std::string& learner_id, const std::string& section_id,
                                  const QuizResult& result, const std::vector<std::string>& missed)
{
    auto& s = slot(learner_id);
    std::lock_guard lock(s.mutex);
    companion::record_attempt(s.state, corpus_, section_id, result, missed, settings_);
    if (s.journal)
        s.journal->append({{"op", "attempt"},
                           {"section_id", section_id},
                           {"result", result_to_json(result)},
                           {"missed", missed}});
}

void LearnerStore::record_visit(const std::string& learner_id, const std::string& section_id)
{
    auto& s = slot(learner_id);
    std::lock_guard lock(s.mutex);
    const bool already = [&] {
        auto it = s.state.nodes.find(section_id);
        return it != s.state.nodes.end() && it->second.engaged;
    }();
    companion::record_visit(s.state, corpus_, section_id);
    if (s.journal && !already)
        s.journal->append({{"op", "visit"}, {"section_id", section_id}});
}

void LearnerStore::set_difficulty(const std::string& learner_id, Difficulty level)
{
    auto& s = slot(learner_id);
    std::lock_guard lock(s.mutex);
    if (s.state.difficulty_preference == level)
        return;
    s.state.difficulty_preference = level;
    if (s.journal)
        s.journal->append({{"op", "difficulty"}, {"level", std::string(difficulty_name(level))}});
}

} // namespace companion
