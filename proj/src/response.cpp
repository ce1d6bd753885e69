#include "ofa/response.hpp"

#include "ofa/errors.hpp"

namespace ofa {

std::string_view to_string(ResponseStatus status) {
    switch (status) {
        case ResponseStatus::ok: return "ok";
        case ResponseStatus::timeout: return "timeout";
        case ResponseStatus::error: return "error";
    }
    return "error";
}

ResponseStatus parse_response_status(std::string_view name) {
    if (name == "ok") return ResponseStatus::ok;
    if (name == "timeout") return ResponseStatus::timeout;
    if (name == "error") return ResponseStatus::error;
    throw ParseError("unknown response status: " + std::string(name));
}

}  // namespace ofa
