#pragma once

#include <stdexcept>
#include <string>

namespace tridomain {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidSpec : Error {
    using Error::Error;
};

struct InvalidConductivity : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct SolverFailure : Error {
    SolverFailure(const std::string& what, double res) : Error(what), residual(res) {}
    double residual;
};

struct Divergence : Error {
    Divergence(const std::string& what, double time) : Error(what), t(time) {}
    double t;
};

}  // namespace tridomain
