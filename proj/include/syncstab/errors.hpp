#pragma once

#include <stdexcept>
#include <string>

namespace syncstab {

// Base of every error raised by the library. `exit_code` is what the CLI
// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg, int exit_code = 3)
        : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& msg)
        : Error("validation error at '" + key + "': " + msg, 2), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class ParseError : public Error {
public:
    ParseError(int line, int column, const std::string& msg)
        : Error("parse error at line " + std::to_string(line) + ", column " +
                    std::to_string(column) + ": " + msg,
                2),
          line_(line), column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_, column_;
};

class InvalidTopology : public Error {
public:
    explicit InvalidTopology(const std::string& msg) : Error("invalid topology: " + msg, 2) {}
};

class NumericalSingularity : public Error {
public:
    NumericalSingularity(const std::string& what, double rcond)
        : Error("numerical singularity in " + what + " (rcond=" + std::to_string(rcond) + ")"),
          rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

class DegenerateTimeConstant : public Error {
public:
    DegenerateTimeConstant(int converter, double value)
        : Error("equivalent time constant of converter " + std::to_string(converter) +
                " is degenerate (" + std::to_string(value) + ")"),
          converter_(converter), value_(value) {}
    int converter() const noexcept { return converter_; }
    double value() const noexcept { return value_; }

private:
    int converter_;
    double value_;
};

class TimescaleSplitInvalid : public Error {
public:
    explicit TimescaleSplitInvalid(double eps)
        : Error("time-scale split invalid (epsilon=" + std::to_string(eps) + ")"), epsilon_(eps) {}
    double epsilon() const noexcept { return epsilon_; }

private:
    double epsilon_;
};

// Quasi-steady PLL equation has no root at this rotor angle.
class SepLost : public Error {
public:
    explicit SepLost(double delta)
        : Error("PLL equilibrium lost at delta=" + std::to_string(delta)), delta_(delta) {}
    double delta() const noexcept { return delta_; }

private:
    double delta_;
};

class IterationFailed : public Error {
public:
    explicit IterationFailed(const std::string& what) : Error("iteration failed: " + what) {}
};

class NoPositiveDampingRegion : public Error {
public:
    explicit NoPositiveDampingRegion(double arg)
        : Error("no positive-damping region (arccos argument " + std::to_string(arg) + ")"),
          argument_(arg) {}
    double argument() const noexcept { return argument_; }

private:
    double argument_;
};

class UndefinedEnergy : public Error {
public:
    UndefinedEnergy() : Error("energy undefined: no stable equilibrium") {}
};

class InvalidEstimate : public Error {
public:
    explicit InvalidEstimate(const std::string& msg) : Error("invalid estimate: " + msg, 2) {}
};

class TrajectoryTooShort : public Error {
public:
    explicit TrajectoryTooShort(double have)
        : Error("trajectory too short after clearance (" + std::to_string(have) + " s)", 2) {}
};

class UepNotConverged : public Error {
public:
    UepNotConverged() : Error("unstable equilibrium search did not converge") {}
};

}  // namespace syncstab
