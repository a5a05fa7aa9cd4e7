#pragma once

#include <stdexcept>
#include <string>

namespace ergo {

/// Malformed inputs: variable-list mismatches, dimension mismatches,
/// unparsable text, missing assignments.
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A coupling check was asked to move coordinates outside the index window.
/// This is a truncation problem, never a statement about the identities.
class ClosureError : public StructuralError {
public:
    explicit ClosureError(const std::string& msg) : StructuralError(msg) {}
};

/// An identity that holds by theorem failed to hold in an exact computation.
class InvariantViolation : public std::runtime_error {
public:
    explicit InvariantViolation(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ergo
