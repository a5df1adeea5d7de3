#include "companion/llm_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "companion/content_indexer.hpp"

namespace companion {

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

constexpr auto kMinute = std::chrono::milliseconds(60s);
constexpr auto kDay = std::chrono::milliseconds(24h);
// Reported when a request can never fit (e.g. larger than a per-minute token limit).
constexpr auto kNever = std::chrono::milliseconds(24h);

std::optional<std::uint64_t> read_limit(const json& limits, const char* key, const std::string& provider)
{
    auto it = limits.find(key);
    if (it == limits.end() || it->is_null())
        return std::nullopt;
    if (!it->is_number_integer() || it->get<long long>() <= 0)
        throw Error(Errc::config_error, "provider '" + provider + "': " + key + " must be a positive integer or null");
    return it->get<std::uint64_t>();
}

std::string describe(const std::exception& e)
{
    return e.what();
}

} // namespace

AllProvidersFailedError::AllProvidersFailedError(std::vector<ProviderFailure> causes)
    : Error(Errc::all_providers_failed,
            [&] {
                std::string msg = "all providers failed";
                for (const auto& c : causes)
                    msg += "; " + c.provider_id + ": " + c.cause;
                return msg;
            }()),
      causes_(std::move(causes))
{
}

std::string_view route_reason_name(RouteReason reason)
{
    switch (reason) {
    case RouteReason::Preferred: return "preferred";
    case RouteReason::QuotaFallback: return "quota_fallback";
    case RouteReason::FailureFallback: return "failure_fallback";
    }
    return "preferred";
}

ProviderRoster roster_from_json(const json& doc)
{
    ProviderRoster roster;
    try {
        if (doc.contains("max_completion_tokens"))
            roster.max_completion_tokens = doc.at("max_completion_tokens").get<std::size_t>();
        std::set<std::string> seen;
        for (const auto& p : doc.at("providers")) {
            ProviderProfile profile;
            profile.provider_id = p.at("provider_id").get<std::string>();
            if (profile.provider_id.empty() || !seen.insert(profile.provider_id).second)
                throw Error(Errc::config_error, "provider ids must be unique and nonempty");
            profile.model_name = p.value("model_name", "");
            profile.endpoint = p.value("endpoint", "");
            profile.key_env = p.value("key_env", "");
            const json limits = p.value("limits", json::object());
            profile.limits.requests_per_minute = read_limit(limits, "requests_per_minute", profile.provider_id);
            profile.limits.requests_per_day = read_limit(limits, "requests_per_day", profile.provider_id);
            profile.limits.tokens_per_minute = read_limit(limits, "tokens_per_minute", profile.provider_id);
            profile.limits.tokens_per_day = read_limit(limits, "tokens_per_day", profile.provider_id);
            profile.price_in = p.value("price_in", 0.0);
            profile.price_out = p.value("price_out", 0.0);
            if (profile.price_in < 0 || profile.price_out < 0)
                throw Error(Errc::config_error, "provider '" + profile.provider_id + "': prices must be nonnegative");
            const auto tier = p.value("tier", std::string("free"));
            if (tier == "free")
                profile.tier = Tier::Free;
            else if (tier == "paid")
                profile.tier = Tier::Paid;
            else
                throw Error(Errc::config_error, "provider '" + profile.provider_id + "': tier must be free or paid");
            profile.priority = p.value("priority", 0);
            roster.providers.push_back(std::move(profile));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::config_error, std::string("invalid provider roster: ") + e.what());
    }
    if (roster.providers.empty())
        throw Error(Errc::config_error, "provider roster is empty");
    return roster;
}

ProviderRoster load_roster(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::config_error, "cannot read provider roster " + path.string());
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw Error(Errc::config_error, "provider roster " + path.string() + " is not valid JSON");
    return roster_from_json(doc);
}

std::vector<const ProviderProfile*> routing_order(const std::vector<ProviderProfile>& profiles)
{
    std::vector<const ProviderProfile*> order;
    for (const auto& p : profiles)
        order.push_back(&p);
    std::stable_sort(order.begin(), order.end(), [](const ProviderProfile* a, const ProviderProfile* b) {
        if (a->tier != b->tier)
            return a->tier == Tier::Free;
        return a->priority < b->priority;
    });
    return order;
}

UsageLedger::UsageLedger(const std::vector<ProviderProfile>& profiles)
{
    for (const auto& p : profiles) {
        auto account = std::make_unique<Account>();
        account->price_in = p.price_in;
        account->price_out = p.price_out;
        accounts_.emplace(p.provider_id, std::move(account));
    }
}

UsageLedger::Account& UsageLedger::account(const std::string& provider_id)
{
    auto it = accounts_.find(provider_id);
    if (it == accounts_.end())
        throw Error(Errc::unknown_provider, "unknown provider '" + provider_id + "'");
    return *it->second;
}

const UsageLedger::Account& UsageLedger::account(const std::string& provider_id) const
{
    return const_cast<UsageLedger*>(this)->account(provider_id);
}

void UsageLedger::prune(const Account& a, TimePoint now)
{
    while (!a.events.empty() && now - a.events.front().at >= kDay)
        a.events.pop_front();
}

// Events stamped later than `now` (possible when callers race) still count.
bool UsageLedger::fits(const Account& a, const QuotaLimits& limits, std::uint64_t tokens, TimePoint now)
{
    prune(a, now);
    std::uint64_t minute_requests = 0, minute_tokens = 0, day_tokens = 0;
    for (const auto& e : a.events) {
        day_tokens += e.tokens;
        if (now - e.at < kMinute) {
            ++minute_requests;
            minute_tokens += e.tokens;
        }
    }
    const std::uint64_t day_requests = a.events.size();
    auto within = [](const std::optional<std::uint64_t>& limit, std::uint64_t used, std::uint64_t add) {
        return !limit || used + add <= *limit;
    };
    return within(limits.requests_per_minute, minute_requests, 1) && within(limits.requests_per_day, day_requests, 1) &&
           within(limits.tokens_per_minute, minute_tokens, tokens) && within(limits.tokens_per_day, day_tokens, tokens);
}

bool UsageLedger::admits(const ProviderProfile& profile, std::uint64_t tokens, TimePoint now) const
{
    const auto& a = account(profile.provider_id);
    std::lock_guard lock(a.mutex);
    return fits(a, profile.limits, tokens, now);
}

std::optional<std::uint64_t> UsageLedger::try_reserve(const ProviderProfile& profile, std::uint64_t tokens, TimePoint now)
{
    auto& a = account(profile.provider_id);
    std::lock_guard lock(a.mutex);
    if (!fits(a, profile.limits, tokens, now))
        return std::nullopt;
    const auto id = a.next_id++;
    auto pos = a.events.end();
    while (pos != a.events.begin() && std::prev(pos)->at > now)
        --pos;
    a.events.insert(pos, Event{now, tokens, id});
    return id;
}

void UsageLedger::settle(const std::string& provider_id, std::uint64_t reservation, std::uint64_t tokens_in,
                         std::uint64_t tokens_out)
{
    auto& a = account(provider_id);
    std::lock_guard lock(a.mutex);
    for (auto& e : a.events) {
        if (e.id == reservation) {
            // Usage above the reservation stays charged at the reserved amount so that
            // windows never hold more than was admitted.
            e.tokens = std::min(e.tokens, tokens_in + tokens_out);
            break;
        }
    }
    ++a.totals.requests;
    a.totals.tokens_in += tokens_in;
    a.totals.tokens_out += tokens_out;
    a.totals.cost += static_cast<double>(tokens_in) * a.price_in + static_cast<double>(tokens_out) * a.price_out;
}

void UsageLedger::release(const std::string& provider_id, std::uint64_t reservation)
{
    auto& a = account(provider_id);
    std::lock_guard lock(a.mutex);
    for (auto& e : a.events)
        if (e.id == reservation)
            e.tokens = 0;
}

void UsageLedger::record_usage(const std::string& provider_id, std::uint64_t tokens_in, std::uint64_t tokens_out,
                               TimePoint now)
{
    auto& a = account(provider_id);
    std::lock_guard lock(a.mutex);
    prune(a, now);
    auto pos = a.events.end();
    while (pos != a.events.begin() && std::prev(pos)->at > now)
        --pos;
    a.events.insert(pos, Event{now, tokens_in + tokens_out, a.next_id++});
    ++a.totals.requests;
    a.totals.tokens_in += tokens_in;
    a.totals.tokens_out += tokens_out;
    a.totals.cost += static_cast<double>(tokens_in) * a.price_in + static_cast<double>(tokens_out) * a.price_out;
}

std::chrono::milliseconds UsageLedger::retry_after(const ProviderProfile& profile, std::uint64_t tokens,
                                                   TimePoint now) const
{
    const auto& a = account(profile.provider_id);
    std::lock_guard lock(a.mutex);
    if (fits(a, profile.limits, tokens, now))
        return std::chrono::milliseconds(0);
    const auto& lim = profile.limits;
    if ((lim.tokens_per_minute && tokens > *lim.tokens_per_minute) || (lim.tokens_per_day && tokens > *lim.tokens_per_day))
        return kNever;

    // Earliest moment at which enough of the oldest events have left a window.
    auto earliest = [&](std::chrono::milliseconds window, const std::optional<std::uint64_t>& max_requests,
                        const std::optional<std::uint64_t>& max_tokens) {
        std::vector<const Event*> in_window;
        std::uint64_t count = 0, used = 0;
        for (const auto& e : a.events) {
            if (now - e.at < window) {
                in_window.push_back(&e);
                ++count;
                used += e.tokens;
            }
        }
        TimePoint at = now;
        for (const auto* e : in_window) {
            const bool ok = (!max_requests || count + 1 <= *max_requests) && (!max_tokens || used + tokens <= *max_tokens);
            if (ok)
                break;
            --count;
            used -= e->tokens;
            at = e->at + window;
        }
        return at;
    };
    const auto t = std::max(earliest(kMinute, lim.requests_per_minute, lim.tokens_per_minute),
                            earliest(kDay, lim.requests_per_day, lim.tokens_per_day));
    return std::max(std::chrono::milliseconds(0), t - now);
}

UsageTotals UsageLedger::totals(const std::string& provider_id) const
{
    const auto& a = account(provider_id);
    std::lock_guard lock(a.mutex);
    return a.totals;
}

double UsageLedger::total_cost() const
{
    double sum = 0.0;
    for (const auto& [id, a] : accounts_) {
        std::lock_guard lock(a->mutex);
        sum += a->totals.cost;
    }
    return sum;
}

RouteDecision route(std::uint64_t estimated_tokens, const UsageLedger& ledger,
                    const std::vector<ProviderProfile>& profiles, TimePoint now)
{
    if (profiles.empty())
        throw Error(Errc::invalid_argument, "no providers configured");
    RouteDecision decision;
    for (const auto* p : routing_order(profiles)) {
        if (ledger.admits(*p, estimated_tokens, now)) {
            decision.provider_id = p->provider_id;
            decision.reason = decision.rejected.empty() ? RouteReason::Preferred : RouteReason::QuotaFallback;
            return decision;
        }
        decision.rejected.push_back(p->provider_id);
    }
    auto wait = kNever;
    for (const auto& p : profiles)
        wait = std::min(wait, ledger.retry_after(p, estimated_tokens, now));
    throw ExhaustedError("all providers are at their quota limits", wait);
}

Gateway::Gateway(ProviderRoster roster, Transport& transport, ClockFn clock)
    : roster_(std::move(roster)), transport_(transport), clock_(std::move(clock)), ledger_(roster_.providers)
{
    if (roster_.providers.empty())
        throw Error(Errc::config_error, "no providers configured");
    order_ = routing_order(roster_.providers);
}

std::uint64_t Gateway::estimate(std::string_view prompt) const
{
    return count_tokens(prompt) + roster_.max_completion_tokens;
}

InvokeResult Gateway::invoke(std::string_view prompt)
{
    const auto estimated = estimate(prompt);
    std::vector<ProviderFailure> failures;
    bool refused = false;
    TimePoint now = clock_();

    for (const auto* p : order_) {
        now = clock_();
        const auto reservation = ledger_.try_reserve(*p, estimated, now);
        if (!reservation) {
            refused = true;
            continue;
        }
        Completion completion;
        try {
            completion = transport_.complete(*p, prompt);
            if (completion.text.empty())
                throw TransportError("empty completion");
        } catch (const std::exception& e) {
            ledger_.release(p->provider_id, *reservation);
            failures.push_back({p->provider_id, describe(e)});
            continue;
        }

        InvokeResult result;
        result.text = std::move(completion.text);
        result.provider_id = p->provider_id;
        result.reason = !failures.empty() ? RouteReason::FailureFallback
                        : refused         ? RouteReason::QuotaFallback
                                          : RouteReason::Preferred;
        result.tokens_in = completion.tokens_in.value_or(count_tokens(prompt));
        result.tokens_out = completion.tokens_out.value_or(count_tokens(result.text));
        result.failures = std::move(failures);
        ledger_.settle(p->provider_id, *reservation, result.tokens_in, result.tokens_out);
        return result;
    }

    if (!failures.empty())
        throw AllProvidersFailedError(std::move(failures));
    auto wait = kNever;
    for (const auto& p : roster_.providers)
        wait = std::min(wait, ledger_.retry_after(p, estimated, now));
    throw ExhaustedError("all providers are at their quota limits", wait);
}

void StubTransport::push(const std::string& provider_id, Outcome outcome)
{
    std::lock_guard lock(mutex_);
    scripted_[provider_id].push_back(std::move(outcome));
}

void StubTransport::set_fallback(Responder fallback)
{
    std::lock_guard lock(mutex_);
    fallback_ = std::move(fallback);
}

Completion StubTransport::complete(const ProviderProfile& profile, std::string_view prompt)
{
    Outcome outcome;
    {
        std::lock_guard lock(mutex_);
        prompts_.emplace_back(prompt);
        auto& queue = scripted_[profile.provider_id];
        if (!queue.empty()) {
            outcome = std::move(queue.front());
            queue.pop_front();
        } else if (fallback_) {
            outcome = fallback_(profile, prompt);
        } else {
            outcome = {false, "no scripted response"};
        }
    }
    if (!outcome.ok)
        throw TransportError(outcome.text);
    return Completion{std::move(outcome.text), std::nullopt, std::nullopt};
}

std::size_t StubTransport::calls() const
{
    std::lock_guard lock(mutex_);
    return prompts_.size();
}

std::vector<std::string> StubTransport::prompts() const
{
    std::lock_guard lock(mutex_);
    return prompts_;
}

CostBreakdown estimate_cost(const CostScenario& s)
{
    if (s.students <= 0 || s.calls_per_day <= 0 || s.days_per_week <= 0 || s.weeks <= 0)
        throw Error(Errc::invalid_argument, "students, calls per day, days per week and weeks must be positive");
    if (s.price_in_per_call < 0 || s.price_out_per_call < 0 || (s.total_calls && *s.total_calls <= 0))
        throw Error(Errc::invalid_argument, "prices must be nonnegative and call totals positive");
    CostBreakdown b;
    b.total_calls = s.total_calls.value_or(s.students * s.calls_per_day * s.days_per_week * s.weeks);
    b.in_cost = b.total_calls * s.price_in_per_call;
    b.out_cost = b.total_calls * s.price_out_per_call;
    b.total_cost = b.in_cost + b.out_cost;
    return b;
}

CostScenario cost_scenario_from_json(const json& doc)
{
    try {
        CostScenario s;
        s.students = doc.at("students").get<double>();
        s.calls_per_day = doc.at("calls_per_day").get<double>();
        s.days_per_week = doc.at("days_per_week").get<double>();
        s.weeks = doc.at("weeks").get<double>();
        s.price_in_per_call = doc.at("price_in_per_call").get<double>();
        s.price_out_per_call = doc.at("price_out_per_call").get<double>();
        if (doc.contains("total_calls") && !doc["total_calls"].is_null())
            s.total_calls = doc["total_calls"].get<double>();
        return s;
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("invalid cost scenario: ") + e.what());
    }
}

} // namespace companion
