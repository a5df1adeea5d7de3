#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "json.hpp"

#include "companion/attestation.hpp"
#include "companion/content_indexer.hpp"
#include "companion/context_selector.hpp"
#include "companion/learner_model.hpp"
#include "companion/llm_gateway.hpp"
#include "companion/question_bank.hpp"

namespace companion {

inline constexpr std::size_t kExplainMatches = 3;
inline constexpr int kQuizRegenerations = 2;
inline constexpr std::size_t kMinTokenBudget = 200;

struct EngineConfig {
    std::filesystem::path corpus_dir;
    std::filesystem::path data_dir;
    std::filesystem::path roster;
    double pass_threshold = kDefaultPassThreshold;
    std::size_t badge_interval = kDefaultBadgeInterval;
    std::size_t cache_threshold = kDefaultCacheThreshold;
    std::size_t token_budget = kDefaultTokenLimit;
    std::size_t reserved_tokens = kDefaultReservedTokens;
    std::optional<std::size_t> required_sections;
    std::string time_zone = "UTC";
    std::string secret_env = "ENGINE_SECRET";
    std::optional<std::uint64_t> seed;
    std::string host = "127.0.0.1";
    int port = 8080;

    /// Throws Errc::config_error naming the first out-of-range field.
    void validate() const;
};

using EnvLookup = std::function<const char*(const char*)>;

/// Applies keys of a JSON object onto `config`. Unknown keys are rejected.
void apply_config_json(EngineConfig& config, const nlohmann::json& doc);
/// Applies ENGINE_* variables.
void apply_environment(EngineConfig& config, const EnvLookup& env);

/// defaults < config file < environment < overrides (command-line flags), then validated.
/// The file comes from `file`, else ENGINE_CONFIG.
EngineConfig resolve_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                            const nlohmann::json& overrides);

/// Indexes every Markdown and HTML file in `dir` (sorted by name); chapter id = file stem.
Corpus ingest_directory(const std::filesystem::path& dir);
/// Writes one <chapter>.json per chapter; returns the paths written.
std::vector<std::filesystem::path> write_indexes(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_indexes(const std::filesystem::path& dir);
/// Persisted indexes under data_dir/index when present, else the corpus directory, else empty.
Corpus load_corpus(const EngineConfig& config);

struct Response {
    int status = 200;
    nlohmann::json body;
};

int http_status(Errc code);
nlohmann::json error_body(Errc code, std::string_view message);

/// Everything the engine needs besides configuration. All randomness and time flow from here.
struct EngineDeps {
    Transport* transport = nullptr;
    ProviderRoster roster;
    ClockFn clock = system_now;
    UuidSource uuids;
    std::optional<std::string> secret;
};

class Engine {
public:
    Engine(EngineConfig config, Corpus corpus, EngineDeps deps);

    const EngineConfig& config() const noexcept { return config_; }
    const Corpus& corpus() const noexcept { return corpus_; }
    Gateway* gateway() noexcept { return gateway_.get(); }
    QuestionBank& bank() noexcept { return bank_; }
    LearnerStore& learners() noexcept { return learners_; }

    nlohmann::json handle_explain(const nlohmann::json& request);
    nlohmann::json handle_quiz(const nlohmann::json& request);
    nlohmann::json handle_submit(const nlohmann::json& request);
    nlohmann::json handle_feedback(const nlohmann::json& request);
    nlohmann::json handle_graph(const std::string& learner_id);
    nlohmann::json handle_progress(const std::string& learner_id);
    nlohmann::json handle_report(const nlohmann::json& request);
    nlohmann::json handle_verify(const nlohmann::json& request);
    nlohmann::json handle_healthz() const;

    /// Issues a report for the learner; the returned file is what gets handed out.
    AttestedReport issue_report(const std::string& learner_id);

    /// Total: every input yields a JSON response.
    Response dispatch(std::string_view method, std::string_view path, std::string_view body) noexcept;

private:
    Gateway& require_gateway();
    std::string require_secret() const;
    GamificationSnapshot snapshot_for(const LearnerState& state) const;
    std::chrono::sys_days today() const;
    std::string next_quiz_id(const std::string& section_id) const;

    EngineConfig config_;
    Corpus corpus_;
    std::chrono::minutes utc_offset_;
    ClockFn clock_;
    UuidSource uuids_;
    std::optional<std::string> secret_;
    std::unique_ptr<Gateway> gateway_;
    QuestionBank bank_;
    LearnerStore learners_;
    std::unique_ptr<HashStore> hashes_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
};

/// Blocks serving HTTP until the process is stopped. Throws Errc::io_error when the
/// address cannot be bound.
void run_server(Engine& engine, const std::string& host, int port);

} // namespace companion
