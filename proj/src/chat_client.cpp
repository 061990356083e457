#include "cosmos/chat_client.hpp"

#include <cstdlib>

#include <httplib.h>

#include "cosmos/errors.hpp"

namespace cosmos {

void split_url(const std::string& url, std::string& scheme_host, std::string& path) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host = url;
        path = "/";
    } else {
        scheme_host = url.substr(0, path_start);
        path = url.substr(path_start);
    }
}

std::string chat_complete(const std::string& endpoint, const std::string& model,
                          const std::string& prompt, int timeout_s) {
    std::string host, path;
    split_url(endpoint, host, path);

    Json body{{"model", model},
              {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
              {"temperature", 0}};

    httplib::Headers headers;
    if (const char* token = std::getenv("COSMOS_WM_TOKEN"))
        headers.emplace("Authorization", std::string("Bearer ") + token);

    httplib::Client client(host);
    client.set_read_timeout(timeout_s, 0);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw SimulationError("endpoint unreachable at " + endpoint);
    if (res->status != 200)
        throw SimulationError("endpoint returned HTTP " + std::to_string(res->status));
    try {
        Json reply = Json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
        throw SimulationError(std::string("malformed chat reply: ") + e.what());
    }
}

} // namespace cosmos
