#pragma once

#include <stdexcept>
#include <string>

namespace cusp {

enum class ErrorKind {
    invalid_argument,
    no_feasible_correction,
    step_budget_exhausted,
    branch_cut,
    degenerate_pair,
    not_invertible,
    sequence_exit,
    start_mismatch,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error
{
  public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    [[nodiscard]] ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::no_feasible_correction: return "no feasible correction";
    case ErrorKind::step_budget_exhausted: return "step budget exhausted";
    case ErrorKind::branch_cut: return "branch cut";
    case ErrorKind::degenerate_pair: return "degenerate pair";
    case ErrorKind::not_invertible: return "h0 not invertible";
    case ErrorKind::sequence_exit: return "sequence exits (0, delta0]";
    case ErrorKind::start_mismatch: return "start level mismatch";
    }
    return "unknown";
}

inline void require(bool condition, const std::string& what)
{
    if (!condition) {
        throw Error(ErrorKind::invalid_argument, what);
    }
}

}  // namespace cusp
