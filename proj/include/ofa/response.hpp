#pragma once

#include <string>
#include <string_view>

namespace ofa {

enum class ResponseStatus { ok, timeout, error };

std::string_view to_string(ResponseStatus status);
ResponseStatus parse_response_status(std::string_view name);

// A response as the ranking engine sees it.
struct CandidateResponse {
    std::string agent_id;
    std::string text;
    ResponseStatus status = ResponseStatus::ok;

    friend bool operator==(const CandidateResponse&, const CandidateResponse&) = default;
};

}  // namespace ofa
