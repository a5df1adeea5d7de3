#pragma once

// Helpers shared by the unit and acceptance suites. The oracles here are written
// independently of the library code they check.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "companion/clock.hpp"
#include "companion/llm_gateway.hpp"
#include "companion/utf8.hpp"

namespace testsupport {

inline std::filesystem::path source_dir()
{
    return std::filesystem::path(COMPANION_SOURCE_DIR);
}

inline std::filesystem::path fixture_corpus()
{
    return source_dir() / "tests" / "fixtures" / "corpus";
}

/// Full (n+1)x(m+1) matrix, no trimming, no row reuse.
inline std::size_t oracle_levenshtein(const std::u32string& a, const std::u32string& b)
{
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i)
        d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j)
        d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
        }
    return d[a.size()][b.size()];
}

inline std::size_t oracle_levenshtein(const std::string& a, const std::string& b)
{
    return oracle_levenshtein(companion::utf8::decode(a), companion::utf8::decode(b));
}

class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("companion-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Manually advanced clock.
class FakeClock {
public:
    explicit FakeClock(companion::TimePoint start) : now_(start) {}
    companion::TimePoint now() const { return now_; }
    void advance(std::chrono::milliseconds d) { now_ += d; }
    void set(companion::TimePoint t) { now_ = t; }
    companion::ClockFn fn()
    {
        return [this] { return now_; };
    }

private:
    companion::TimePoint now_;
};

inline companion::TimePoint at(int y, unsigned m, unsigned d, int hour = 12)
{
    using namespace std::chrono;
    return time_point_cast<milliseconds>(sys_days(year(y) / month(m) / day(d)) + hours(hour));
}

/// Text of a well-formed model answer in the quiz template shape.
inline std::string quiz_answer(const std::string& tag, std::size_t answers_per_question = 4)
{
    std::ostringstream out;
    out << "{\"questions\": [";
    for (int q = 0; q < 3; ++q) {
        if (q)
            out << ",";
        out << "{\"question\": \"" << tag << " question " << q + 1 << "?\", \"answers\": [";
        for (std::size_t a = 0; a < answers_per_question; ++a) {
            if (a)
                out << ",";
            out << "{\"text\": \"" << tag << " option " << q + 1 << "." << a + 1 << "\", \"correct\": "
                << (a == static_cast<std::size_t>(q) % answers_per_question ? "true" : "false")
                << ", \"explanation\": \"why " << q + 1 << "." << a + 1 << "\"}";
        }
        out << "]}";
    }
    out << "]}";
    return out.str();
}

inline const std::vector<std::string>& vocabulary()
{
    static const std::vector<std::string> words = {
        "model",    "data",      "training", "gradient", "tensor",    "memory",   "latency",  "batch",
        "accuracy", "pipeline",  "feature",  "label",    "network",   "layer",    "weight",   "loss",
        "device",   "inference", "quantize", "prune",    "schedule",  "kernel",   "cache",    "buffer",
        "server",   "client",    "update",   "sample",   "sensor",    "signal",   "energy",   "budget",
        "storage",  "compute",   "graph",    "operator", "precision", "recall",   "drift",    "monitor",
        "deploy",   "rollback",  "federated", "privacy", "shard",     "replica",  "throughput", "queue"};
    return words;
}

/// Deterministic pseudo-prose paragraph of roughly `words` words.
inline std::string synthetic_paragraph(std::mt19937_64& rng, std::size_t words)
{
    const auto& vocab = vocabulary();
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<int> sentence_len(6, 14);
    std::string out;
    int left = sentence_len(rng);
    bool capital = true;
    for (std::size_t i = 0; i < words; ++i) {
        auto w = vocab[pick(rng)];
        if (capital)
            w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        capital = false;
        if (!out.empty())
            out += ' ';
        out += w;
        if (--left == 0 || i + 1 == words) {
            out += '.';
            left = sentence_len(rng);
            capital = true;
        }
    }
    return out;
}

/// Markdown chapter with `sections` sections of `per_section` paragraphs each.
inline std::string synthetic_chapter(std::uint64_t seed, std::size_t sections, std::size_t per_section,
                                     std::size_t words_per_paragraph)
{
    std::mt19937_64 rng(seed);
    std::ostringstream out;
    out << "# Synthetic Chapter " << seed << "\n\n";
    for (std::size_t s = 0; s < sections; ++s) {
        out << "## Section " << s + 1 << " on " << vocabulary()[s % vocabulary().size()] << "\n\n";
        for (std::size_t p = 0; p < per_section; ++p)
            out << synthetic_paragraph(rng, words_per_paragraph) << "\n\n";
    }
    return out.str();
}

inline companion::ProviderProfile provider(const std::string& id, companion::Tier tier, int priority,
                                           companion::QuotaLimits limits = {})
{
    companion::ProviderProfile p;
    p.provider_id = id;
    p.model_name = id + "-model";
    p.tier = tier;
    p.priority = priority;
    p.limits = limits;
    p.price_in = tier == companion::Tier::Paid ? 0.00001 : 0.0;
    p.price_out = tier == companion::Tier::Paid ? 0.00003 : 0.0;
    return p;
}

/// One free and one paid provider with no limits.
inline companion::ProviderRoster open_roster()
{
    companion::ProviderRoster r;
    r.providers.push_back(provider("free-a", companion::Tier::Free, 0));
    r.providers.push_back(provider("paid-a", companion::Tier::Paid, 0));
    return r;
}

inline std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Relative path -> bytes for every regular file under `root`.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root)
{
    std::map<std::string, std::string> files;
    if (!std::filesystem::exists(root))
        return files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file())
            files[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
    return files;
}

} // namespace testsupport
