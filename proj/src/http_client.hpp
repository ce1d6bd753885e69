#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace ofa::detail {

struct HttpReply {
    int status = 0;
    std::string body;
};

// POSTs a JSON body to `base_url` + `path`. The base URL may carry a path
// prefix ("http://host:8000/agents/alexa"). Connection failures and
// timeouts throw TransportError; any status code is returned as-is.
HttpReply post_json(std::string_view base_url, std::string_view path, const std::string& body,
                    std::chrono::milliseconds timeout);

}  // namespace ofa::detail
