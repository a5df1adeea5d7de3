#include "companion/service_api.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "companion/fuzzy_matcher.hpp"

namespace companion {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io_error, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t parse_count(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-')
        throw Error(Errc::config_error, key + " must be a nonnegative integer, got '" + text + "'");
    return static_cast<std::size_t>(value);
}

double parse_real(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    double value = 0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size())
        throw Error(Errc::config_error, key + " must be a number, got '" + text + "'");
    return value;
}

// Accepts JSON numbers and numeric strings so that file, environment and flags share one path.
std::string scalar_text(const std::string& key, const json& value)
{
    if (value.is_string())
        return value.get<std::string>();
    if (value.is_number_unsigned())
        return std::to_string(value.get<std::uint64_t>());
    if (value.is_number_integer())
        return std::to_string(value.get<std::int64_t>());
    if (value.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", value.get<double>());
        return buf;
    }
    throw Error(Errc::config_error, key + " has an unsupported type");
}

void set_field(EngineConfig& c, const std::string& key, const std::string& text)
{
    if (key == "corpus_dir")
        c.corpus_dir = text;
    else if (key == "data_dir")
        c.data_dir = text;
    else if (key == "roster")
        c.roster = text;
    else if (key == "pass_threshold")
        c.pass_threshold = parse_real(key, text);
    else if (key == "badge_interval")
        c.badge_interval = parse_count(key, text);
    else if (key == "cache_threshold")
        c.cache_threshold = parse_count(key, text);
    else if (key == "token_budget")
        c.token_budget = parse_count(key, text);
    else if (key == "reserved_tokens")
        c.reserved_tokens = parse_count(key, text);
    else if (key == "required_sections")
        c.required_sections = parse_count(key, text);
    else if (key == "time_zone")
        c.time_zone = text;
    else if (key == "secret_env")
        c.secret_env = text;
    else if (key == "seed")
        c.seed = parse_count(key, text);
    else if (key == "host")
        c.host = text;
    else if (key == "port")
        c.port = static_cast<int>(parse_count(key, text));
    else
        throw Error(Errc::config_error, "unknown configuration key '" + key + "'");
}

const char* const kConfigKeys[] = {"corpus_dir",      "data_dir",          "roster",     "pass_threshold",
                                   "badge_interval",  "cache_threshold",   "token_budget", "reserved_tokens",
                                   "required_sections", "time_zone",       "secret_env", "seed",
                                   "host",            "port"};

std::string env_name(std::string key)
{
    for (auto& ch : key)
        ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return "ENGINE_" + key;
}

const json& require_object(const json& request)
{
    if (!request.is_object())
        throw Error(Errc::invalid_argument, "request body must be a JSON object");
    return request;
}

std::string string_field(const json& request, const char* key)
{
    auto it = request.find(key);
    if (it == request.end() || !it->is_string())
        throw Error(Errc::invalid_argument, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::string learner_field(const json& request)
{
    auto id = string_field(request, "learner_id");
    if (id.empty())
        throw Error(Errc::invalid_argument, "learner_id must not be empty");
    return id;
}

std::optional<Difficulty> difficulty_field(const json& request)
{
    auto it = request.find("difficulty");
    if (it == request.end() || it->is_null())
        return std::nullopt;
    if (!it->is_string())
        throw Error(Errc::invalid_argument, "field 'difficulty' must be a string");
    return parse_difficulty(it->get<std::string>());
}

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

} // namespace

void EngineConfig::validate() const
{
    if (!(pass_threshold > 0.0 && pass_threshold <= 1.0))
        throw Error(Errc::config_error, "pass_threshold must be in (0, 1]");
    if (badge_interval < 1)
        throw Error(Errc::config_error, "badge_interval must be at least 1");
    if (cache_threshold <= kMixTrigger)
        throw Error(Errc::config_error, "cache_threshold must exceed 10");
    if (token_budget < kMinTokenBudget)
        throw Error(Errc::config_error, "token_budget must be at least 200");
    if (reserved_tokens >= token_budget)
        throw Error(Errc::config_error, "reserved_tokens must be below token_budget");
    if (required_sections && *required_sections < 1)
        throw Error(Errc::config_error, "required_sections must be at least 1");
    if (secret_env.empty())
        throw Error(Errc::config_error, "secret_env must name an environment variable");
    if (port < 0 || port > 65535)
        throw Error(Errc::config_error, "port must be in [0, 65535]");
    parse_utc_offset(time_zone);
}

void apply_config_json(EngineConfig& config, const json& doc)
{
    if (!doc.is_object())
        throw Error(Errc::config_error, "configuration must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (value.is_null())
            continue;
        set_field(config, key, scalar_text(key, value));
    }
}

void apply_environment(EngineConfig& config, const EnvLookup& env)
{
    for (const char* key : kConfigKeys) {
        const char* value = env(env_name(key).c_str());
        if (value && *value)
            set_field(config, key, value);
    }
}

EngineConfig resolve_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                            const json& overrides)
{
    EngineConfig config;
    std::optional<std::filesystem::path> path = file;
    if (!path) {
        const char* from_env = env("ENGINE_CONFIG");
        if (from_env && *from_env)
            path = from_env;
    }
    if (path) {
        auto doc = json::parse(read_file(*path), nullptr, false);
        if (doc.is_discarded())
            throw Error(Errc::config_error, path->string() + " is not valid JSON");
        apply_config_json(config, doc);
    }
    apply_environment(config, env);
    if (!overrides.is_null())
        apply_config_json(config, overrides);
    config.validate();
    return config;
}

Corpus ingest_directory(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir))
        throw Error(Errc::io_error, "corpus directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && format_for_path(entry.path().string()) != MarkupFormat::Auto)
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<SectionIndex> chapters;
    for (const auto& file : files) {
        const auto stem = file.stem().string();
        try {
            chapters.push_back(index_document(read_file(file), stem, format_for_path(file.string()), stem));
        } catch (const MarkupError& e) {
            throw Error(Errc::malformed_markup, file.filename().string() + ": " + e.what());
        }
    }
    return Corpus(std::move(chapters));
}

std::vector<std::filesystem::path> write_indexes(const Corpus& corpus, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& chapter : corpus.chapters()) {
        const auto path = dir / (file_safe(chapter.chapter_id()) + ".json");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << to_json(chapter) << '\n';
        if (!out)
            throw Error(Errc::io_error, "cannot write " + path.string());
        written.push_back(path);
    }
    return written;
}

Corpus load_indexes(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<SectionIndex> chapters;
    for (const auto& file : files)
        chapters.push_back(section_index_from_json(read_file(file)));
    return Corpus(std::move(chapters));
}

Corpus load_corpus(const EngineConfig& config)
{
    if (!config.data_dir.empty() && std::filesystem::is_directory(config.data_dir / "index"))
        return load_indexes(config.data_dir / "index");
    if (!config.corpus_dir.empty())
        return ingest_directory(config.corpus_dir);
    return Corpus();
}

int http_status(Errc code)
{
    switch (code) {
    case Errc::unknown_provider:
    case Errc::unknown_section:
    case Errc::unknown_chapter:
    case Errc::unknown_quiz_id:
        return 404;
    case Errc::duplicate_quiz_id:
        return 409;
    case Errc::exhausted:
        return 429;
    case Errc::all_providers_failed:
    case Errc::generation_failed:
        return 502;
    case Errc::corpus_not_loaded:
    case Errc::missing_secret:
        return 503;
    case Errc::io_error:
    case Errc::config_error:
        return 500;
    default:
        return 400;
    }
}

json error_body(Errc code, std::string_view message)
{
    return {{"error", {{"code", errc_name(code)}, {"message", std::string(message)}}}};
}

Engine::Engine(EngineConfig config, Corpus corpus, EngineDeps deps)
    : config_(std::move(config)),
      corpus_(std::move(corpus)),
      utc_offset_(parse_utc_offset(config_.time_zone)),
      clock_(deps.clock ? deps.clock : ClockFn(system_now)),
      secret_(std::move(deps.secret)),
      bank_(config_.data_dir.empty() ? std::nullopt
                                     : std::optional<std::filesystem::path>(config_.data_dir / "question_bank"),
            config_.cache_threshold),
      learners_(corpus_,
                config_.data_dir.empty() ? std::nullopt
                                         : std::optional<std::filesystem::path>(config_.data_dir / "learners"),
                LearnerSettings{utc_offset_, kDefaultMissedCap})
{
    config_.validate();
    if (config_.seed)
        rng_.seed(*config_.seed);
    else
        rng_.seed(std::random_device{}());

    if (deps.uuids)
        uuids_ = std::move(deps.uuids);
    else if (config_.seed)
        uuids_ = seeded_uuid_source(*config_.seed ^ 0x9e3779b97f4a7c15ULL);
    else
        uuids_ = random_uuid_source();

    if (deps.transport && !deps.roster.providers.empty())
        gateway_ = std::make_unique<Gateway>(std::move(deps.roster), *deps.transport, clock_);

    if (config_.data_dir.empty())
        hashes_ = std::make_unique<InMemoryHashStore>();
    else
        hashes_ = std::make_unique<JsonFileHashStore>(config_.data_dir / "report_hashes.json");
}

Gateway& Engine::require_gateway()
{
    if (!gateway_)
        throw Error(Errc::config_error, "no provider roster configured");
    return *gateway_;
}

std::string Engine::require_secret() const
{
    if (!secret_ || secret_->empty())
        throw Error(Errc::missing_secret, "environment variable " + config_.secret_env + " is not set");
    return *secret_;
}

std::chrono::sys_days Engine::today() const
{
    return local_day(clock_(), utc_offset_);
}

GamificationSnapshot Engine::snapshot_for(const LearnerState& state) const
{
    GamificationSettings settings;
    settings.badge_interval = config_.badge_interval;
    settings.required_sections = config_.required_sections;
    settings.pass_threshold = config_.pass_threshold;
    return snapshot(state, corpus_, settings, today());
}

std::string Engine::next_quiz_id(const std::string& section_id) const
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "/q%04zu", bank_.repository(section_id).generation_count() + 1);
    return section_id + buf;
}

json Engine::handle_explain(const json& request)
{
    require_object(request);
    if (corpus_.empty())
        throw Error(Errc::corpus_not_loaded, "no corpus is loaded");
    const auto highlight = string_field(request, "highlight");
    const auto chapter_id = string_field(request, "chapter_id");
    const auto* chapter = corpus_.find_chapter(chapter_id);
    if (!chapter)
        throw Error(Errc::unknown_chapter, "unknown chapter '" + chapter_id + "'");
    auto level = difficulty_field(request);
    if (!level) {
        level = Difficulty::Beginner;
        if (request.contains("learner_id") && request["learner_id"].is_string())
            level = learners_.state(request["learner_id"].get<std::string>()).difficulty_preference;
    }
    if (normalize(highlight).empty())
        throw Error(Errc::empty_query, "highlight must contain text");

    const auto matches = match_top_k(highlight, *chapter, kExplainMatches);
    const auto prompt = build_explanation_prompt(highlight, matches, *chapter, *level);
    auto answer = require_gateway().invoke(prompt);

    json citations = json::array();
    for (const auto& m : matches)
        citations.push_back({{"paragraph_id", m.paragraph_id}, {"similarity", m.similarity}});
    return {{"explanation", answer.text},
            {"citations", std::move(citations)},
            {"difficulty", difficulty_name(*level)},
            {"provider_id", answer.provider_id},
            {"route_reason", route_reason_name(answer.reason)}};
}

json Engine::handle_quiz(const json& request)
{
    require_object(request);
    if (corpus_.empty())
        throw Error(Errc::corpus_not_loaded, "no corpus is loaded");
    const auto section_id = string_field(request, "section_id");
    const auto learner_id = learner_field(request);
    const auto* section = corpus_.find_section(section_id);
    if (!section)
        throw Error(Errc::unknown_section, "unknown section '" + section_id + "'");

    auto level = difficulty_field(request);
    if (level)
        learners_.set_difficulty(learner_id, *level);
    else
        level = learners_.state(learner_id).difficulty_preference;
    learners_.record_visit(learner_id, section_id);

    SourceDecision decision;
    {
        std::lock_guard lock(rng_mutex_);
        decision = bank_.decide(section_id, rng_);
    }
    json response = {{"mode", source_mode_name(decision.mode)}, {"gateway_calls", 0}};
    if (decision.use_cache) {
        response["quiz"] = quiz_to_json(bank_.serve(section_id, *decision.quiz_id));
        response["source"] = "cache";
        return response;
    }

    const auto context = select_context(*section, ContextBudget{config_.token_budget, config_.reserved_tokens});
    std::string section_number;
    if (const auto* chapter = corpus_.find_chapter(section->chapter_id)) {
        const auto& sections = chapter->sections();
        for (std::size_t i = 0; i < sections.size(); ++i)
            if (sections[i].section_id == section_id)
                section_number = std::to_string(i + 1);
    }
    const auto prompt = build_quiz_prompt(context, section->title, section_number, *level);

    auto& gateway = require_gateway();
    std::optional<Quiz> quiz;
    std::string last_error;
    int calls = 0;
    std::string provider_id;
    for (int attempt = 0; attempt <= kQuizRegenerations && !quiz; ++attempt) {
        auto answer = gateway.invoke(prompt);
        ++calls;
        try {
            quiz = parse_quiz_response(answer.text);
            provider_id = answer.provider_id;
        } catch (const QuizParseError& e) {
            last_error = e.what();
        }
    }
    if (!quiz)
        throw Error(Errc::generation_failed,
                    "no valid quiz after " + std::to_string(calls) + " generations: " + last_error);

    quiz->section_id = section_id;
    quiz->difficulty = *level;
    for (;;) {
        quiz->quiz_id = next_quiz_id(section_id);
        try {
            bank_.store(*quiz);
            break;
        } catch (const Error& e) {
            if (e.code() != Errc::duplicate_quiz_id)
                throw;
        }
    }
    bank_.serve(section_id, quiz->quiz_id);

    response["quiz"] = quiz_to_json(*quiz);
    response["source"] = "generated";
    response["gateway_calls"] = calls;
    response["provider_id"] = provider_id;
    return response;
}

json Engine::handle_submit(const json& request)
{
    require_object(request);
    const auto quiz_id = string_field(request, "quiz_id");
    const auto learner_id = learner_field(request);
    auto it = request.find("responses");
    if (it == request.end() || !it->is_array())
        throw Error(Errc::invalid_argument, "field 'responses' must be an array of answer indexes");
    std::vector<long long> responses;
    for (const auto& r : *it) {
        if (!r.is_number_integer())
            throw Error(Errc::invalid_argument, "each response must be an integer answer index");
        responses.push_back(r.get<long long>());
    }

    const auto quiz = bank_.find_quiz(quiz_id);
    if (!quiz)
        throw Error(Errc::unknown_quiz_id, "no stored quiz '" + quiz_id + "'");
    const auto result = grade_quiz(*quiz, responses, config_.pass_threshold, clock_());
    std::vector<std::string> missed;
    for (std::size_t i = 0; i < result.correctness.size(); ++i)
        if (!result.correctness[i])
            missed.push_back(quiz->questions[i].question_text);
    learners_.record_attempt(learner_id, quiz->section_id, result, missed);

    return {{"result", result_to_json(result)},
            {"snapshot", snapshot_to_json(snapshot_for(learners_.state(learner_id)))}};
}

json Engine::handle_feedback(const json& request)
{
    require_object(request);
    const auto quiz_id = string_field(request, "quiz_id");
    const auto vote = parse_vote(string_field(request, "vote"));
    bank_.feedback(quiz_id, vote);
    return {{"quiz_id", quiz_id}, {"vote", vote == Vote::Up ? "up" : "down"}, {"status", "recorded"}};
}

json Engine::handle_graph(const std::string& learner_id)
{
    return graph_snapshot(learners_.state(learner_id), corpus_);
}

json Engine::handle_progress(const std::string& learner_id)
{
    const auto state = learners_.state(learner_id);
    auto body = snapshot_to_json(snapshot_for(state));
    body["learner_id"] = learner_id;
    body["difficulty"] = difficulty_name(state.difficulty_preference);
    return body;
}

AttestedReport Engine::issue_report(const std::string& learner_id)
{
    const auto secret = require_secret();
    return generate_report(snapshot_for(learners_.state(learner_id)), learner_id, secret, clock_, uuids_, *hashes_);
}

json Engine::handle_report(const json& request)
{
    require_object(request);
    const auto report = issue_report(learner_field(request));
    return {{"report_id", report.report_id}, {"report", report.file()}};
}

json Engine::handle_verify(const json& request)
{
    require_object(request);
    const auto file = string_field(request, "report");
    const auto v = verify_report(file, require_secret(), *hashes_);
    json body = {{"verdict", v.verdict == Verdict::Verified ? "Verified" : "NotVerified"},
                 {"diagnostic", v.diagnostic}};
    if (!v.report_id.empty())
        body["report_id"] = v.report_id;
    return body;
}

json Engine::handle_healthz() const
{
    std::size_t sections = 0;
    for (const auto& c : corpus_.chapters())
        sections += c.sections().size();
    return {{"status", "ok"},
            {"chapters", corpus_.chapters().size()},
            {"sections", sections},
            {"providers", gateway_ ? gateway_->profiles().size() : 0},
            {"attestation", secret_ && !secret_->empty()}};
}

Response Engine::dispatch(std::string_view method, std::string_view path, std::string_view body) noexcept
{
    try {
        auto parse_body = [&] {
            auto doc = json::parse(body, nullptr, false);
            if (doc.is_discarded())
                throw Error(Errc::invalid_argument, "request body is not valid JSON");
            return doc;
        };
        auto tail = [&](std::string_view prefix) { return std::string(path.substr(prefix.size())); };

        if (method == "GET") {
            if (path == "/healthz")
                return {200, handle_healthz()};
            if (starts_with(path, "/graph/") && path.size() > 7)
                return {200, handle_graph(tail("/graph/"))};
            if (starts_with(path, "/progress/") && path.size() > 10)
                return {200, handle_progress(tail("/progress/"))};
        } else if (method == "POST") {
            if (path == "/explain")
                return {200, handle_explain(parse_body())};
            if (path == "/quiz")
                return {200, handle_quiz(parse_body())};
            if (path == "/submit")
                return {200, handle_submit(parse_body())};
            if (path == "/feedback")
                return {200, handle_feedback(parse_body())};
            if (path == "/report")
                return {200, handle_report(parse_body())};
            if (path == "/report/verify")
                return {200, handle_verify(parse_body())};
        }
        return {404, error_body(Errc::invalid_argument, "no route for " + std::string(method) + " " + std::string(path))};
    } catch (const ExhaustedError& e) {
        auto b = error_body(e.code(), e.what());
        b["error"]["retry_after_ms"] = e.retry_after().count();
        return {http_status(e.code()), std::move(b)};
    } catch (const AllProvidersFailedError& e) {
        auto b = error_body(e.code(), e.what());
        json causes = json::array();
        for (const auto& c : e.causes())
            causes.push_back({{"provider_id", c.provider_id}, {"cause", c.cause}});
        b["error"]["causes"] = std::move(causes);
        return {http_status(e.code()), std::move(b)};
    } catch (const Error& e) {
        return {http_status(e.code()), error_body(e.code(), e.what())};
    } catch (const json::exception& e) {
        return {400, error_body(Errc::invalid_argument, e.what())};
    } catch (const std::exception& e) {
        return {500, error_body(Errc::io_error, e.what())};
    } catch (...) {
        return {500, error_body(Errc::io_error, "unexpected failure")};
    }
}

} // namespace companion
