#pragma once

#include <stdexcept>
#include <string>

namespace qthr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

/// Bad input: maps to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

/// Numerical failure: maps to exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DomainError : public ValidationError { public: using ValidationError::ValidationError; };
class PoleError : public DomainError { public: using DomainError::DomainError; };
class AsymptoticsViolation : public ValidationError { public: using ValidationError::ValidationError; };

class OverflowError : public NumericalError { public: using NumericalError::NumericalError; };
class ConvergenceError : public NumericalError { public: using NumericalError::NumericalError; };
class IntegrationError : public NumericalError { public: using NumericalError::NumericalError; };
class StiffnessError : public NumericalError { public: using NumericalError::NumericalError; };
class DegenerateError : public NumericalError { public: using NumericalError::NumericalError; };
class DecaySelectionError : public NumericalError { public: using NumericalError::NumericalError; };
class WindowError : public NumericalError { public: using NumericalError::NumericalError; };
class EnergyDriftError : public NumericalError { public: using NumericalError::NumericalError; };
class NoCrossingError : public NumericalError { public: using NumericalError::NumericalError; };

} // namespace qthr
