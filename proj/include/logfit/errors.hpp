#pragma once

#include <stdexcept>
#include <string>

namespace logfit {

/// Raised when a model, schedule or config violates one of its invariants.
/// `field()` names the offending entry so callers can report it verbatim.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Raised by the integrators when a state component becomes non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double t, const std::string& what)
        : std::runtime_error("diverged at t=" + std::to_string(t) + ": " + what), t_(t) {}

    double time() const noexcept { return t_; }

private:
    double t_;
};

}  // namespace logfit
