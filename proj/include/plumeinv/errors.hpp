#pragma once

#include <stdexcept>
#include <string>

namespace plumeinv {

// Bad input or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (e.g. negative distance).
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Wind too weak for the plume model to be meaningful.
class CalmWindError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Factorization failure, non-finite intermediate, etc. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace plumeinv
