#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace powerlin {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ZeroImpedance : public Error {
  public:
    explicit ZeroImpedance(std::string const& what) : Error("zero impedance: " + what) {}
};

class NonPositiveBase : public Error {
  public:
    NonPositiveBase() : Error("base_mva must be positive") {}
};

class SyntaxError : public Error {
  public:
    SyntaxError(std::size_t line, std::size_t column, std::string const& message)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                message),
          line_(line), column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

class MissingMatrix : public Error {
  public:
    explicit MissingMatrix(std::string name)
        : Error("missing matrix: " + name), name_(std::move(name)) {}
    std::string const& name() const { return name_; }

  private:
    std::string name_;
};

class UnsupportedCostModel : public Error {
  public:
    explicit UnsupportedCostModel(std::string const& what)
        : Error("unsupported cost model: " + what) {}
};

class InvalidBusType : public Error {
  public:
    explicit InvalidBusType(std::string const& what) : Error("invalid bus type: " + what) {}
};

class InvalidNetwork : public Error {
  public:
    using Error::Error;
};

class NonConvergence : public Error {
  public:
    NonConvergence(int iterations, double mismatch)
        : Error("power flow did not converge after " + std::to_string(iterations) +
                " iterations (max mismatch " + std::to_string(mismatch) + ")"),
          iterations_(iterations), mismatch_(mismatch) {}
    int iterations() const { return iterations_; }
    double mismatch() const { return mismatch_; }

  private:
    int iterations_;
    double mismatch_;
};

class SingularJacobian : public Error {
  public:
    explicit SingularJacobian(int iteration)
        : Error("singular Jacobian at iteration " + std::to_string(iteration)) {}
};

class RecoveryDomain : public Error {
  public:
    explicit RecoveryDomain(std::string const& what) : Error("recovery domain: " + what) {}
};

class InconsistentModel : public Error {
  public:
    explicit InconsistentModel(std::string const& what) : Error("inconsistent model: " + what) {}
};

class NonConvex : public Error {
  public:
    explicit NonConvex(std::string const& what) : Error("non-convex objective: " + what) {}
};

/// Raised by pipelines that require an optimal QP solve; carries the solver status text.
class SolveFailed : public Error {
  public:
    using Error::Error;
};

class NonPositiveAggregate : public Error {
  public:
    explicit NonPositiveAggregate(std::string const& what)
        : Error("non-positive aggregate: " + what) {}
};

class NoFeasiblePoint : public Error {
  public:
    explicit NoFeasiblePoint(std::string const& what = "no feasible grid point") : Error(what) {}
};

class IncompleteMatrix : public Error {
  public:
    explicit IncompleteMatrix(std::string const& what) : Error("incomplete matrix: " + what) {}
};

}  // namespace powerlin
