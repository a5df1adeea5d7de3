#include "companion/attestation.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <cstdio>
#include <fstream>
#include <random>

namespace companion {

using nlohmann::json;

namespace {

std::string to_hex(const unsigned char* data, std::size_t len)
{
    static const char digits[] = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (std::size_t i = 0; i < len; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xF];
    }
    return out;
}

bool equal_ct(std::string_view a, std::string_view b)
{
    if (a.size() != b.size())
        return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

bool is_lower_hex(std::string_view s)
{
    for (char c : s)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')))
            return false;
    return true;
}

std::string format_uuid(std::uint64_t hi, std::uint64_t lo)
{
    hi = (hi & ~0xF000ULL) | 0x4000ULL;                     // version 4
    lo = (lo & ~(0xC000ULL << 48)) | (0x8000ULL << 48);     // RFC 4122 variant
    char buf[37];
    std::snprintf(buf, sizeof buf, "%08llx-%04llx-%04llx-%04llx-%012llx", (unsigned long long)(hi >> 32),
                  (unsigned long long)((hi >> 16) & 0xFFFF), (unsigned long long)(hi & 0xFFFF),
                  (unsigned long long)(lo >> 48), (unsigned long long)(lo & 0xFFFFFFFFFFFFULL));
    return buf;
}

Verification reject(std::string diagnostic, std::string report_id = {})
{
    return {Verdict::NotVerified, std::move(diagnostic), std::move(report_id)};
}

std::string code_for(std::string_view body, std::string_view report_id, std::string_view secret)
{
    std::string message(body);
    message += report_id;
    return hmac_sha256_hex(secret, sha256_hex(message));
}

} // namespace

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(Errc::io_error, "SHA-256 failed");
    return to_hex(digest, len);
}

std::string hmac_sha256_hex(std::string_view key, std::string_view message)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
              reinterpret_cast<const unsigned char*>(message.data()), message.size(), digest, &len))
        throw Error(Errc::io_error, "HMAC-SHA256 failed");
    return to_hex(digest, len);
}

bool InMemoryHashStore::put_if_absent(const std::string& report_id, const std::string& hash)
{
    std::lock_guard lock(mutex_);
    return hashes_.emplace(report_id, hash).second;
}

std::optional<std::string> InMemoryHashStore::get(const std::string& report_id) const
{
    std::lock_guard lock(mutex_);
    auto it = hashes_.find(report_id);
    if (it == hashes_.end())
        return std::nullopt;
    return it->second;
}

JsonFileHashStore::JsonFileHashStore(std::filesystem::path path) : path_(std::move(path)) {}

std::map<std::string, std::string> JsonFileHashStore::load() const
{
    std::ifstream in(path_);
    if (!in)
        return {};
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw Error(Errc::io_error, "hash store " + path_.string() + " is corrupt");
    return doc.get<std::map<std::string, std::string>>();
}

bool JsonFileHashStore::put_if_absent(const std::string& report_id, const std::string& hash)
{
    std::lock_guard lock(mutex_);
    auto hashes = load();
    if (!hashes.emplace(report_id, hash).second)
        return false;
    if (path_.has_parent_path())
        std::filesystem::create_directories(path_.parent_path());
    auto tmp = path_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json(hashes).dump(2) << '\n';
        if (!out)
            throw Error(Errc::io_error, "cannot write hash store " + tmp.string());
    }
    std::filesystem::rename(tmp, path_);
    return true;
}

std::optional<std::string> JsonFileHashStore::get(const std::string& report_id) const
{
    std::lock_guard lock(mutex_);
    auto hashes = load();
    auto it = hashes.find(report_id);
    if (it == hashes.end())
        return std::nullopt;
    return it->second;
}

UuidSource random_uuid_source()
{
    return [] {
        std::uint64_t words[2];
        if (RAND_bytes(reinterpret_cast<unsigned char*>(words), sizeof words) != 1)
            throw Error(Errc::io_error, "random generator failed");
        return format_uuid(words[0], words[1]);
    };
}

UuidSource seeded_uuid_source(std::uint64_t seed)
{
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng] {
        const auto hi = (*rng)();
        const auto lo = (*rng)();
        return format_uuid(hi, lo);
    };
}

std::string canonical_serialize(const GamificationSnapshot& stats, const std::string& learner_id, TimePoint issued_at,
                                const std::string& report_id)
{
    // nlohmann's default object type keeps keys sorted.
    json body = {{"issued_at", to_iso8601(issued_at)},
                 {"learner_id", learner_id},
                 {"report_id", report_id},
                 {"stats", snapshot_to_json(stats)}};
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string AttestedReport::file() const
{
    std::string out = body;
    out += "\n\n";
    out += kTrailerPrefix;
    out += code_k;
    out += '\n';
    return out;
}

AttestedReport generate_report(const GamificationSnapshot& stats, const std::string& learner_id,
                               std::string_view secret, const ClockFn& clock, const UuidSource& uuid_source,
                               HashStore& store)
{
    if (secret.empty())
        throw Error(Errc::missing_secret, "attestation secret is not configured");
    AttestedReport report;
    report.report_id = uuid_source();
    report.body = canonical_serialize(stats, learner_id, clock(), report.report_id);
    report.code_k = code_for(report.body, report.report_id, secret);
    report.stored_hash = sha256_hex(report.body + report.code_k);
    if (!store.put_if_absent(report.report_id, report.stored_hash))
        throw Error(Errc::io_error, "report id " + report.report_id + " already issued");
    return report;
}

Verification verify_report(std::string_view file, std::string_view secret, const HashStore& store)
{
    if (secret.empty())
        throw Error(Errc::missing_secret, "attestation secret is not configured");

    const std::string separator = std::string("\n\n") + std::string(kTrailerPrefix);
    const auto at = file.rfind(separator);
    if (at == std::string_view::npos)
        return reject("malformed report: missing trailer");
    if (file.find("\n" + std::string(kTrailerPrefix)) != at + 1)
        return reject("malformed report: duplicate trailer");
    const auto code = file.substr(at + separator.size());
    if (code.size() != 65 || code.back() != '\n')
        return reject("malformed report: trailer must hold one 64-digit code and end with a newline");
    const auto k = code.substr(0, 64);
    if (!is_lower_hex(k))
        return reject("malformed report: trailer code is not lowercase hex");
    const auto body = file.substr(0, at);

    auto doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("report_id") || !doc["report_id"].is_string())
        return reject("malformed report: body is not a report document");
    const auto report_id = doc["report_id"].get<std::string>();

    const auto stored = store.get(report_id);
    if (!stored)
        return reject("unknown report id", report_id);

    std::string hashed(body);
    hashed += k;
    if (!equal_ct(sha256_hex(hashed), *stored))
        return reject("report content does not match the issued hash", report_id);
    // Binds the report to the secret; the stored hash alone does not.
    if (!equal_ct(code_for(body, report_id, secret), k))
        return reject("attestation code does not match the secret", report_id);
    return {Verdict::Verified, "ok", report_id};
}

} // namespace companion
