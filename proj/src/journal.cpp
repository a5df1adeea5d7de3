#include "companion/journal.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "companion/error.hpp"

namespace companion {

Journal::Journal(std::filesystem::path path) : path_(std::move(path)) {}

void Journal::append(const nlohmann::json& record) const
{
    if (path_.has_parent_path())
        std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out)
        throw Error(Errc::io_error, "cannot open journal " + path_.string());
    out << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    out.flush();
    if (!out)
        throw Error(Errc::io_error, "write failed on journal " + path_.string());
}

void Journal::replay(const std::function<void(const nlohmann::json&)>& visit) const
{
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        return;
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t start = 0;
    std::size_t number = 0;
    while (start < content.size()) {
        ++number;
        auto end = content.find('\n', start);
        const bool torn = end == std::string::npos;
        if (torn)
            end = content.size();
        const std::string_view line(content.data() + start, end - start);
        start = end + 1;
        if (line.empty())
            continue;
        auto record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            if (torn)
                break;
            throw Error(Errc::io_error, path_.string() + ":" + std::to_string(number) + ": corrupt journal record");
        }
        visit(record);
    }
}

std::string file_safe(std::string_view id)
{
    std::string out;
    for (char ch : id) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
            out.push_back(ch);
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    if (out.empty() || out == "." || out == "..")
        out = "%" + out;
    return out;
}

} // namespace companion
