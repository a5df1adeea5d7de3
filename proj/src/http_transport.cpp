#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>

#include "companion/llm_gateway.hpp"

namespace companion {

namespace {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw TransportError("endpoint '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string expand(std::string templ, const std::string& model)
{
    const std::string marker = "{model}";
    for (auto pos = templ.find(marker); pos != std::string::npos; pos = templ.find(marker, pos + model.size()))
        templ.replace(pos, marker.size(), model);
    return templ;
}

} // namespace

HttpJsonTransport::HttpJsonTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

Completion HttpJsonTransport::complete(const ProviderProfile& profile, std::string_view prompt)
{
    if (profile.endpoint.empty())
        throw TransportError("provider '" + profile.provider_id + "' has no endpoint");
    const auto url = split_url(expand(profile.endpoint, profile.model_name));

    httplib::Headers headers;
    if (!profile.key_env.empty()) {
        const char* key = std::getenv(profile.key_env.c_str());
        if (!key || !*key)
            throw TransportError("environment variable " + profile.key_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    nlohmann::json body = {{"model", profile.model_name},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}})}};

    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res)
        throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status));

    auto doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded())
        throw TransportError("response is not JSON");
    try {
        Completion c;
        c.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
            if (usage->contains("prompt_tokens"))
                c.tokens_in = usage->at("prompt_tokens").get<std::uint64_t>();
            if (usage->contains("completion_tokens"))
                c.tokens_out = usage->at("completion_tokens").get<std::uint64_t>();
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unexpected response shape: ") + e.what());
    }
}

} // namespace companion
