#pragma once

#include <stdexcept>
#include <string>

// Every failure mode in the library has its own exception type so callers
// (and the test suite) can match on the condition, not the message text.
namespace ragadapt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// embedding_core
struct ZeroVectorError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct NormViolationError : Error { using Error::Error; };

// store_io (RAEB container)
struct BadMagicError : Error { using Error::Error; };
struct UnsupportedVersionError : Error { using Error::Error; };
struct TruncatedFileError : Error { using Error::Error; };
struct TrailingBytesError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// retrieval_engine
struct BudgetExceedsDatabaseError : Error { using Error::Error; };
struct EmptyQueryClassError : Error { using Error::Error; };

// adaptation_engine
struct HeadMismatchError : Error { using Error::Error; };
struct WeightSumViolationError : Error { using Error::Error; };
struct EmptySampleSetError : Error { using Error::Error; };
struct NonFiniteGradientError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };

// synthetic_world
struct TooManyClassesError : Error { using Error::Error; };
struct UnreachableSeparationError : Error { using Error::Error; };

// theory_lab
struct AssumptionViolatedError : Error { using Error::Error; };

// experiment_cli
struct ConfigError : Error {
    ConfigError(const std::string& msg, int line = 0) : Error(msg), line_number(line) {}
    int line_number;
};

}  // namespace ragadapt
