#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "companion/clock.hpp"
#include "companion/learner_model.hpp"

namespace companion {

inline constexpr std::string_view kTrailerPrefix = "ATTEST-CODE: ";

std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view message);

/// Server-side store of report hashes keyed by report id.
class HashStore {
public:
    virtual ~HashStore() = default;
    /// Returns false, leaving the store unchanged, when the id is already present.
    virtual bool put_if_absent(const std::string& report_id, const std::string& hash) = 0;
    virtual std::optional<std::string> get(const std::string& report_id) const = 0;
};

class InMemoryHashStore : public HashStore {
public:
    bool put_if_absent(const std::string& report_id, const std::string& hash) override;
    std::optional<std::string> get(const std::string& report_id) const override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> hashes_;
};

/// One JSON object {report_id: hash} rewritten atomically on each insert.
class JsonFileHashStore : public HashStore {
public:
    explicit JsonFileHashStore(std::filesystem::path path);
    bool put_if_absent(const std::string& report_id, const std::string& hash) override;
    std::optional<std::string> get(const std::string& report_id) const override;

private:
    std::map<std::string, std::string> load() const;

    std::filesystem::path path_;
    mutable std::mutex mutex_;
};

using UuidSource = std::function<std::string()>;

/// Version-4 UUIDs from the OpenSSL random generator.
UuidSource random_uuid_source();
/// Version-4 UUIDs from a seeded generator; reproducible.
UuidSource seeded_uuid_source(std::uint64_t seed);

/// Compact JSON with sorted keys: {issued_at, learner_id, report_id, stats}.
std::string canonical_serialize(const GamificationSnapshot& stats, const std::string& learner_id, TimePoint issued_at,
                                const std::string& report_id);

struct AttestedReport {
    std::string report_id;
    std::string body;
    std::string code_k;      // lowercase hex
    std::string stored_hash; // lowercase hex, kept server-side

    /// body, blank line, trailer, newline.
    std::string file() const;
};

/// Throws Errc::missing_secret for an empty secret, Errc::io_error when the report id
/// already exists in the store.
AttestedReport generate_report(const GamificationSnapshot& stats, const std::string& learner_id,
                               std::string_view secret, const ClockFn& clock, const UuidSource& uuid_source,
                               HashStore& store);

enum class Verdict { Verified, NotVerified };

struct Verification {
    Verdict verdict = Verdict::NotVerified;
    std::string diagnostic;
    std::string report_id;
};

/// Checks the stored hash against the file and the trailer code against the secret.
/// Never throws for bad input; throws Errc::missing_secret for an empty secret.
Verification verify_report(std::string_view report_file, std::string_view secret, const HashStore& store);

} // namespace companion
