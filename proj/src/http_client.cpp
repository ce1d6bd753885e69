#include "http_client.hpp"

#include <httplib.h>

#include "ofa/errors.hpp"

namespace ofa::detail {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

SplitUrl split_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw TransportError("url has no scheme: " + std::string(url));
    }
    if (url.substr(0, scheme_end) != "http") {
        throw TransportError("only http:// urls are supported: " + std::string(url));
    }
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string_view::npos) {
        out.origin = std::string(url);
    } else {
        out.origin = std::string(url.substr(0, path_start));
        out.prefix = std::string(url.substr(path_start));
        while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    }
    return out;
}

}  // namespace

HttpReply post_json(std::string_view base_url, std::string_view path, const std::string& body,
                    std::chrono::milliseconds timeout) {
    const auto url = split_url(base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    const std::string full_path = url.prefix + std::string(path);
    auto res = client.Post(full_path, body, "application/json");
    if (!res) {
        throw TransportError("POST " + url.origin + full_path + " failed: " + httplib::to_string(res.error()));
    }
    return HttpReply{res->status, res->body};
}

}  // namespace ofa::detail
