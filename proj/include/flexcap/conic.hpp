#pragma once

// Intermediate representation for programs with a linear objective, linear
// equalities/inequalities and second-order cones, plus the solver adapter.

#include "flexcap/common.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace flexcap::conic {

struct Term {
    int var = 0;
    double coef = 0.0;
};

/// Affine expression  sum(coef * x[var]) + constant.
class LinExpr {
public:
    LinExpr() = default;
    LinExpr(double constant) : constant_(constant) {}  // NOLINT(implicit)

    static LinExpr variable(int index, double coef = 1.0);

    LinExpr& add(int var, double coef);
    LinExpr& add_constant(double c) {
        constant_ += c;
        return *this;
    }
    LinExpr& operator+=(const LinExpr& other);
    LinExpr& operator-=(const LinExpr& other);
    LinExpr& operator*=(double s);

    // Merges duplicate variables and drops exact zeros.
    void compress();

    double evaluate(const Vec& x) const;
    double evaluate(const std::vector<double>& x) const;
    // Sum of |coef * x| + |constant|, the natural magnitude for scaled residuals.
    double magnitude(const Vec& x) const;

    const std::vector<Term>& terms() const { return terms_; }
    double constant() const { return constant_; }
    bool is_constant() const { return terms_.empty(); }

private:
    std::vector<Term> terms_;
    double constant_ = 0.0;
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double s, LinExpr a);

/// Contiguous block of scalar variables with a stable name.
struct VarBlock {
    std::string name;
    int offset = 0;
    int size = 0;
    int operator[](int i) const { return offset + i; }
    LinExpr expr(int i, double coef = 1.0) const { return LinExpr::variable(offset + i, coef); }
};

struct LinearRow {
    LinExpr expr;  // expr == 0 or expr <= 0
    std::string label;
};

/// ||args|| <= bound
struct SecondOrderCone {
    std::vector<LinExpr> args;
    LinExpr bound;
    std::string label;
    // Size of the cone in standard form: bound plus arguments.
    int size() const { return static_cast<int>(args.size()) + 1; }
};

enum class Sense { Minimize, Maximize };

class ConicProgram {
public:
    VarBlock add_variable(const std::string& name, int size);
    int add_equality(LinExpr expr, std::string label);
    int add_inequality(LinExpr expr, std::string label);
    int add_soc(std::vector<LinExpr> args, LinExpr bound, std::string label);
    void set_objective(Sense sense, LinExpr objective);

    void freeze();
    bool frozen() const { return frozen_; }

    int num_variables() const { return num_vars_; }
    int num_cones() const { return static_cast<int>(cones_.size()); }
    int num_equalities() const { return static_cast<int>(equalities_.size()); }
    int num_inequalities() const { return static_cast<int>(inequalities_.size()); }

    const VarBlock& block(const std::string& name) const;
    bool has_block(const std::string& name) const { return block_index_.count(name) > 0; }
    const std::vector<VarBlock>& blocks() const { return blocks_; }
    const std::vector<LinearRow>& equalities() const { return equalities_; }
    const std::vector<LinearRow>& inequalities() const { return inequalities_; }
    const std::vector<SecondOrderCone>& cones() const { return cones_; }
    const LinExpr& objective() const { return objective_; }
    Sense sense() const { return sense_; }

    /// Sparse-triplet JSON dump, used for debugging and for the result fingerprint.
    nlohmann::json dump() const;
    std::string fingerprint() const;

private:
    void check_mutable() const;
    void check_expr(const LinExpr& e, const std::string& label) const;

    std::vector<VarBlock> blocks_;
    std::map<std::string, int> block_index_;
    int num_vars_ = 0;
    std::vector<LinearRow> equalities_;
    std::vector<LinearRow> inequalities_;
    std::vector<SecondOrderCone> cones_;
    LinExpr objective_;
    Sense sense_ = Sense::Minimize;
    bool frozen_ = false;
};

struct Tolerances {
    double feasibility = 1e-8;   // requested from the engine
    double gap = 1e-8;
    double accept = 1e-6;        // independent re-check threshold
    int max_iterations = 200;
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalLimit };

std::string to_string(Status s);

struct SolveStats {
    int iterations = 0;
    double seconds = 0.0;
    double max_linear_violation = 0.0;
    double max_cone_violation = 0.0;
    bool verified = false;          // independent re-check passed
    bool reduced_accuracy = false;  // engine stopped at the accept tolerance
};

struct ConicSolution {
    Status status = Status::NumericalLimit;
    Vec x;
    double objective = 0.0;
    SolveStats stats;

    Vec values(const VarBlock& b) const { return x.segment(b.offset, b.size); }
    double value(const VarBlock& b, int i) const { return x(b.offset + i); }
};

/// min c'x  s.t.  A x = b,  G x + s = h,  s in R+^linear x Q^{soc_dims...}
struct StandardForm {
    SpMat A;
    Vec b;
    SpMat G;
    Vec h;
    Vec c;
    int num_linear = 0;
    std::vector<int> soc_dims;
};

struct EngineResult {
    Status status = Status::NumericalLimit;
    Vec x;
    int iterations = 0;
    bool reduced_accuracy = false;
};

/// Narrow adapter every SOCP-capable engine implements.
class Engine {
public:
    virtual ~Engine() = default;
    virtual EngineResult solve(const StandardForm& problem, const Tolerances& tol) = 0;
};

/// Bundled primal-dual interior-point engine (homogeneous embedding, Nesterov-Todd scaling).
std::unique_ptr<Engine> make_interior_point_engine();

/// Lowers a frozen program to standard form. Cones whose arguments carry no
/// variables are reduced to linear rows; identically zero arguments are dropped.
StandardForm to_standard_form(const ConicProgram& program);

struct Violation {
    double linear = 0.0;
    double cone = 0.0;
};
/// Largest scaled violation of every row and cone of the program at x.
Violation max_violation(const ConicProgram& program, const Vec& x);

ConicSolution solve(const ConicProgram& program, const Tolerances& tol = {});
ConicSolution solve(const ConicProgram& program, Engine& engine, const Tolerances& tol = {});

/// Number of second-order cones of the robust multi-service aggregation problem
/// for T steps, n_s service sets, n_u uncertainty sets, N_n nodes, N_l lines,
/// N_c controllable resources and N_s storage assets.
long long count_cones(long long T, long long n_s, long long n_u, long long N_n, long long N_l, long long N_c,
                      long long N_s);

}  // namespace flexcap::conic
