#pragma once

#include <stdexcept>
#include <string>

namespace overlay {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numeric cell could not be parsed (carries row/column context).
struct ParseError : Error {
    using Error::Error;
};

/// A required column/series is missing from an input file.
struct SchemaError : Error {
    using Error::Error;
};

/// Input series are not aligned on the same months.
struct AlignmentError : Error {
    using Error::Error;
};

/// An argument is outside its documented domain.
struct DomainError : Error {
    using Error::Error;
};

/// An internal invariant or caller contract was violated.
struct ContractViolation : Error {
    using Error::Error;
};

/// Too few observations to estimate moments.
struct InsufficientDataError : Error {
    using Error::Error;
};

/// Constraint parameters are contradictory before any solve is attempted.
struct InfeasibleSpecError : Error {
    using Error::Error;
};

}  // namespace overlay
