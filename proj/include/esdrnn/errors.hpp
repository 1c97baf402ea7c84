#pragma once

#include <stdexcept>
#include <string>

namespace esdrnn {

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function (log of a non-positive value, ...).
class DomainError : public std::domain_error {
public:
	using std::domain_error::domain_error;
};

/// A computation produced NaN or Inf. Training steps abort on this.
class NumericError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Invalid input data or configuration.
class ValidationError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

} // namespace esdrnn
