#pragma once

#include <string>

#include "cosmos/types.hpp"

namespace cosmos {

/// One chat-completions round trip: POST {model, messages:[{user, prompt}],
/// temperature: 0} to the endpoint and return the assistant text. Throws
/// SimulationError when the endpoint is unreachable or the reply is
/// malformed. Auth token, when present in COSMOS_WM_TOKEN, is sent as a
/// bearer header.
std::string chat_complete(const std::string& endpoint, const std::string& model,
                          const std::string& prompt, int timeout_s = 60);

/// Splits "scheme://host:port/path" into client base and path.
void split_url(const std::string& url, std::string& scheme_host, std::string& path);

} // namespace cosmos
