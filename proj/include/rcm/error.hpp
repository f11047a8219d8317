#pragma once

#include <stdexcept>
#include <string>

namespace rcm {

/// Base class for every error raised by the library. `module()` names the
/// component that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// Fractal definition fails the structural requirements (too few maps,
// non-orthogonal U_i, fewer than two essential fixed points, ...).
class InvalidFractalError : public Error {
public:
    using Error::Error;
};

class PrecisionError : public Error {
public:
    using Error::Error;
};

class SingularTraceError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(std::string module, const std::string& what, double last_residual)
        : Error(std::move(module), what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class ParseError : public Error {
public:
    ParseError(std::string source, int line, const std::string& what)
        : Error("config", source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace rcm
