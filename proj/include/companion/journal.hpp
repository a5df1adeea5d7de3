#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace companion {

/// Append-only JSON-lines file. Each record is one compact JSON object per line.
class Journal {
public:
    explicit Journal(std::filesystem::path path);

    const std::filesystem::path& path() const noexcept { return path_; }

    /// Appends and flushes one record; creates parent directories on first use.
    void append(const nlohmann::json& record) const;

    /// Calls `visit` for every record in file order. Missing file means no records.
    /// A torn final line (crash mid-append) is ignored; corruption elsewhere throws.
    void replay(const std::function<void(const nlohmann::json&)>& visit) const;

private:
    std::filesystem::path path_;
};

/// Maps an opaque identifier to a file-name-safe string (percent-encoding everything
/// outside [A-Za-z0-9._-]); distinct ids map to distinct names.
std::string file_safe(std::string_view id);

} // namespace companion
