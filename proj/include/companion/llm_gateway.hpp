#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "companion/clock.hpp"
#include "companion/error.hpp"

namespace companion {

inline constexpr std::size_t kDefaultMaxCompletionTokens = 1024;

enum class Tier { Free, Paid };

/// Absent limits are unlimited.
struct QuotaLimits {
    std::optional<std::uint64_t> requests_per_minute;
    std::optional<std::uint64_t> requests_per_day;
    std::optional<std::uint64_t> tokens_per_minute;
    std::optional<std::uint64_t> tokens_per_day;
};

struct ProviderProfile {
    std::string provider_id;
    std::string model_name;
    std::string endpoint;    // URL template; "{model}" is replaced by model_name
    std::string key_env;     // environment variable holding the API key
    QuotaLimits limits;
    double price_in = 0.0;   // per input token
    double price_out = 0.0;  // per output token
    Tier tier = Tier::Free;
    int priority = 0;        // lower is preferred
};

struct ProviderRoster {
    std::vector<ProviderProfile> providers;
    std::size_t max_completion_tokens = kDefaultMaxCompletionTokens;
};

ProviderRoster roster_from_json(const nlohmann::json& doc);
ProviderRoster load_roster(const std::filesystem::path& path);

/// Free tiers by priority, then paid tiers by priority; ties keep configuration order.
std::vector<const ProviderProfile*> routing_order(const std::vector<ProviderProfile>& profiles);

enum class RouteReason { Preferred, QuotaFallback, FailureFallback };
std::string_view route_reason_name(RouteReason reason);

struct RouteDecision {
    std::string provider_id;
    RouteReason reason = RouteReason::Preferred;
    std::vector<std::string> rejected; // providers refused for quota, in routing order
};

class ExhaustedError : public Error {
public:
    ExhaustedError(const std::string& message, std::chrono::milliseconds retry_after)
        : Error(Errc::exhausted, message), retry_after_(retry_after)
    {
    }
    std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

private:
    std::chrono::milliseconds retry_after_;
};

struct ProviderFailure {
    std::string provider_id;
    std::string cause;
};

class AllProvidersFailedError : public Error {
public:
    explicit AllProvidersFailedError(std::vector<ProviderFailure> causes);
    const std::vector<ProviderFailure>& causes() const noexcept { return causes_; }

private:
    std::vector<ProviderFailure> causes_;
};

struct UsageTotals {
    std::uint64_t requests = 0;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
    double cost = 0.0;
};

/// Sliding-window usage per provider (60 s and 24 h windows) plus cumulative totals.
/// Each provider's counters sit behind their own mutex; admission is check-and-record
/// in one step so concurrent callers never overshoot a limit.
class UsageLedger {
public:
    explicit UsageLedger(const std::vector<ProviderProfile>& profiles);
    UsageLedger(const UsageLedger&) = delete;
    UsageLedger& operator=(const UsageLedger&) = delete;

    /// Whether one request of `tokens` fits all four windows of the provider at `now`.
    bool admits(const ProviderProfile& profile, std::uint64_t tokens, TimePoint now) const;

    /// Atomically checks admits() and, if so, records the request with `tokens` reserved.
    /// Returns a reservation id, or nullopt when the quota refuses.
    std::optional<std::uint64_t> try_reserve(const ProviderProfile& profile, std::uint64_t tokens, TimePoint now);

    /// Replaces a reservation's token count with actual usage and accrues cost.
    void settle(const std::string& provider_id, std::uint64_t reservation, std::uint64_t tokens_in,
                std::uint64_t tokens_out);
    /// A failed call keeps its request slot but returns its reserved tokens.
    void release(const std::string& provider_id, std::uint64_t reservation);

    /// Records a completed call directly. Throws Errc::unknown_provider.
    void record_usage(const std::string& provider_id, std::uint64_t tokens_in, std::uint64_t tokens_out,
                      TimePoint now);

    /// Time until `tokens` would be admitted by the provider, assuming no new traffic.
    std::chrono::milliseconds retry_after(const ProviderProfile& profile, std::uint64_t tokens, TimePoint now) const;

    UsageTotals totals(const std::string& provider_id) const;
    double total_cost() const;

private:
    struct Event {
        TimePoint at;
        std::uint64_t tokens;
        std::uint64_t id;
    };
    struct Account {
        double price_in = 0.0;
        double price_out = 0.0;
        mutable std::mutex mutex;
        mutable std::deque<Event> events; // last 24 h, oldest first
        UsageTotals totals;
        std::uint64_t next_id = 1;
    };

    Account& account(const std::string& provider_id);
    const Account& account(const std::string& provider_id) const;
    static void prune(const Account& a, TimePoint now);
    static bool fits(const Account& a, const QuotaLimits& limits, std::uint64_t tokens, TimePoint now);

    std::map<std::string, std::unique_ptr<Account>, std::less<>> accounts_;
};

/// Pure routing decision: first provider in routing order whose quotas admit the request.
/// Throws ExhaustedError when none does.
RouteDecision route(std::uint64_t estimated_tokens, const UsageLedger& ledger,
                    const std::vector<ProviderProfile>& profiles, TimePoint now);

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Completion {
    std::string text;
    std::optional<std::uint64_t> tokens_in;  // as reported by the provider
    std::optional<std::uint64_t> tokens_out;
};

/// Sends one prompt to one provider. Throws TransportError on any failure.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Completion complete(const ProviderProfile& profile, std::string_view prompt) = 0;
};

struct InvokeResult {
    std::string text;
    std::string provider_id;
    RouteReason reason = RouteReason::Preferred;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
    std::vector<ProviderFailure> failures; // providers that failed before the one that answered
};

/// Routes prompts across providers, falling back on quota refusal or transport failure.
class Gateway {
public:
    Gateway(ProviderRoster roster, Transport& transport, ClockFn clock = system_now);

    const std::vector<ProviderProfile>& profiles() const noexcept { return roster_.providers; }
    UsageLedger& ledger() noexcept { return ledger_; }
    const UsageLedger& ledger() const noexcept { return ledger_; }

    /// Token estimate used for admission: prompt tokens plus the completion allowance.
    std::uint64_t estimate(std::string_view prompt) const;

    /// One attempt per provider in routing order. Throws ExhaustedError when no provider
    /// had quota, AllProvidersFailedError when every admitted provider failed.
    InvokeResult invoke(std::string_view prompt);

private:
    ProviderRoster roster_;
    std::vector<const ProviderProfile*> order_;
    Transport& transport_;
    ClockFn clock_;
    UsageLedger ledger_;
};

/// Scripted transport for tests and offline runs. Each provider has a queue of
/// outcomes; an empty queue falls back to the default responder.
class StubTransport : public Transport {
public:
    struct Outcome {
        bool ok = true;
        std::string text; // completion on success, cause on failure
    };
    using Responder = std::function<Outcome(const ProviderProfile&, std::string_view prompt)>;

    StubTransport() = default;
    explicit StubTransport(Responder fallback) : fallback_(std::move(fallback)) {}

    void push(const std::string& provider_id, Outcome outcome);
    void set_fallback(Responder fallback);

    Completion complete(const ProviderProfile& profile, std::string_view prompt) override;

    std::size_t calls() const;
    std::vector<std::string> prompts() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::deque<Outcome>> scripted_;
    Responder fallback_;
    std::vector<std::string> prompts_;
};

/// OpenAI-style chat-completions over HTTP(S). The API key is read from the
/// provider's key environment variable at call time.
class HttpJsonTransport : public Transport {
public:
    explicit HttpJsonTransport(std::chrono::seconds timeout = std::chrono::seconds(60));
    Completion complete(const ProviderProfile& profile, std::string_view prompt) override;

private:
    std::chrono::seconds timeout_;
};

struct CostScenario {
    double students = 0;
    double calls_per_day = 0;
    double days_per_week = 0;
    double weeks = 0;
    double price_in_per_call = 0;
    double price_out_per_call = 0;
    std::optional<double> total_calls; // overrides the product when set
};

struct CostBreakdown {
    double total_calls = 0;
    double in_cost = 0;
    double out_cost = 0;
    double total_cost = 0;
};

/// Deployment cost: calls = students * calls/day * days/week * weeks, priced per call.
CostBreakdown estimate_cost(const CostScenario& scenario);
CostScenario cost_scenario_from_json(const nlohmann::json& doc);

} // namespace companion
