#pragma once

#include <stdexcept>
#include <string>

namespace ergo {

enum class ErrorCode {
    SingularMatrix,
    NonConvergence,
    NotPSD,
    NotIrreducible,
    Periodic,
    SingularCovariance,
    EmptyStructure,
    StationarityViolated,
    Infeasible,
    SolverStalled,
    NotApplicable,
    ParseError,
    ValidationError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace ergo
