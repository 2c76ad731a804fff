#pragma once

#include <stdexcept>
#include <string>

namespace bd {

/// Bad argument or out-of-range input (index 0, z > zs, eta inadmissible, ...).
class domain_error : public std::runtime_error {
public:
    explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A certified computation could not finish within its term/step budget.
class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Iterative solver failed to converge; message carries the residual.
class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested mass exceeds the saturation mass of the model.
class supercritical_error : public std::runtime_error {
public:
    explicit supercritical_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// ODE integration hit a step-size underflow (stiffness) or positivity loss.
class integration_error : public std::runtime_error {
public:
    explicit integration_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bd
