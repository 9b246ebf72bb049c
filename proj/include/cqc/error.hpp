#pragma once

#include <stdexcept>
#include <string>

namespace cqc {

enum class Errc {
    domain,               // argument outside an operation's domain
    support_mismatch,     // distributions on different supports
    absolute_continuity,  // q_i = 0 while p_i > 0
    endpoint,             // tilt requested at a degenerate mean
    infeasible,           // empty feasible set
    box_violation,        // parameter outside its box
    length_mismatch,      // arrival streams of different lengths
    too_few_probes,
    collision_exhaustion,
    unbuffered_interval,
    no_match,
    parse,
};

inline const char* to_string(Errc code) noexcept {
    switch (code) {
    case Errc::domain: return "domain";
    case Errc::support_mismatch: return "support_mismatch";
    case Errc::absolute_continuity: return "absolute_continuity";
    case Errc::endpoint: return "endpoint";
    case Errc::infeasible: return "infeasible";
    case Errc::box_violation: return "box_violation";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::too_few_probes: return "too_few_probes";
    case Errc::collision_exhaustion: return "collision_exhaustion";
    case Errc::unbuffered_interval: return "unbuffered_interval";
    case Errc::no_match: return "no_match";
    case Errc::parse: return "parse";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace cqc
