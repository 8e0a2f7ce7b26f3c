#pragma once

#include <stdexcept>
#include <string>

namespace prescale {

/// Input data is unreadable, malformed beyond tolerance, or violates a
/// documented precondition of a pipeline stage.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// A provisioning request cannot be satisfied. The message names the
/// binding constraint (capacity, deadline, offer specs).
class infeasible_error : public std::runtime_error {
public:
    explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace prescale
