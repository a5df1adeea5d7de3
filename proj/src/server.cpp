#include "httplib.h"

#include "companion/service_api.hpp"

namespace companion {

void run_server(Engine& engine, const std::string& host, int port)
{
    httplib::Server server;
    auto handle = [&engine](const httplib::Request& req, httplib::Response& res) {
        const auto out = engine.dispatch(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
    };
    server.Get(".*", handle);
    server.Post(".*", handle);
    server.Put(".*", handle);
    server.Delete(".*", handle);
    if (!server.listen(host, port))
        throw Error(Errc::io_error, "cannot listen on " + host + ":" + std::to_string(port));
}

} // namespace companion
