#pragma once

#include <stdexcept>
#include <string>

namespace cpgate {

enum class ErrorKind {
    invalid_argument,
    clipped_packet,
    infeasible_control,
    infeasible_eta,
    convergence_failure,
    unstable_step,
    calibration_failure,
};

inline const char *to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::clipped_packet: return "clipped-packet";
    case ErrorKind::infeasible_control: return "infeasible-control";
    case ErrorKind::infeasible_eta: return "infeasible-eta";
    case ErrorKind::convergence_failure: return "convergence-failure";
    case ErrorKind::unstable_step: return "unstable-step";
    case ErrorKind::calibration_failure: return "calibration-failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &msg)
        : std::runtime_error(std::string(to_string(kind)) + ": " + msg), m_kind(kind)
    {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

// Carries the largest emission efficiency the loss budget allows.
class InfeasibleEta : public Error {
public:
    InfeasibleEta(double requested, double maximum)
        : Error(ErrorKind::infeasible_eta,
                "requested eta " + std::to_string(requested) +
                    " exceeds loss-feasible maximum " + std::to_string(maximum)),
          m_requested(requested), m_maximum(maximum)
    {}

    double requested() const noexcept { return m_requested; }
    double maximum() const noexcept { return m_maximum; }

private:
    double m_requested;
    double m_maximum;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &msg)
{
    throw Error(kind, msg);
}

inline void require(bool cond, const std::string &msg)
{
    if (!cond) {
        fail(ErrorKind::invalid_argument, msg);
    }
}

} // namespace cpgate
