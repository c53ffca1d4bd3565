#include "ergo/errors.hpp"

namespace ergo {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::NotPSD: return "NotPSD";
        case ErrorCode::NotIrreducible: return "NotIrreducible";
        case ErrorCode::Periodic: return "Periodic";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::EmptyStructure: return "EmptyStructure";
        case ErrorCode::StationarityViolated: return "StationarityViolated";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::SolverStalled: return "SolverStalled";
        case ErrorCode::NotApplicable: return "NotApplicable";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
    }
    return "UnknownError";
}

}  // namespace ergo
