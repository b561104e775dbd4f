#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexcap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using SpRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

// Error categories map one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or value (exit code 2).
class ParseError : public Error {
public:
    ParseError(const std::string& where, std::size_t line, const std::string& what);
    ParseError(const std::string& where, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

/// Structurally valid input that violates a domain invariant (exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The optimization problem has no feasible point (exit code 3).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// The conic engine failed or its answer did not survive re-verification (exit code 4).
class SolverError : public Error {
public:
    using Error::Error;
};

/// A post-condition that must hold by construction was breached (exit code 5).
class InvariantError : public Error {
public:
    using Error::Error;
};

enum class ExitCode : int { Ok = 0, Config = 2, Infeasible = 3, Solver = 4, InvariantBreach = 5 };

ExitCode exit_code_for(const std::exception& e);

// Reads FLEXCAP_LOG (trace|debug|info|warn|error|off) once and configures the default logger.
void init_logging();

// 64-bit FNV-1a, stable across platforms; used for program fingerprints.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace flexcap
