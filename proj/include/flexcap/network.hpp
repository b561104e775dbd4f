#pragma once

// Balanced single-phase network model, exact power flow, per-step linear
// surrogate and the orthogonal basis split of the slack-power row.

#include "flexcap/common.hpp"
#include "flexcap/parallel.hpp"

#include <complex>
#include <string>
#include <vector>

namespace flexcap {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class BusType { Slack, PQ };

struct Bus {
    std::string id;
    BusType type = BusType::PQ;
    double v_min = 0.9;  // pu
    double v_max = 1.1;  // pu
};

struct Branch {
    std::string id;
    int from = 0;  // bus index
    int to = 0;
    Complex z;     // series impedance, pu
    double i_max = 0.0;  // pu
};

struct NetworkDescription {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    double base_kva = 1000.0;
    double base_kv = 1.0;

    int num_buses() const { return static_cast<int>(buses.size()); }
    int num_branches() const { return static_cast<int>(branches.size()); }
    int slack() const;
    int bus_index(const std::string& id) const;  // throws ValidationError if unknown
    double kw_to_pu(double kw) const { return kw / base_kva; }
    double pu_to_kw(double pu) const { return pu * base_kva; }

    // Throws ValidationError naming the first violated invariant.
    void validate() const;
};

// Reads a JSON header {"base_kva", "base_kv", "buses": csv, "branches": csv};
// CSV paths are resolved relative to the header.
NetworkDescription load_network(const std::string& header_path);
void save_network(const NetworkDescription& net, const std::string& header_path);

struct PowerFlowOptions {
    double tolerance = 1e-10;  // max complex power mismatch, pu
    int max_iterations = 30;
};

struct PowerFlowSolution {
    CVec v;              // bus voltages
    CVec i;              // branch currents, from -> to
    Complex grid_power;  // drawn from the upstream grid at the slack bus
    double mismatch = 0.0;
    int iterations = 0;

    // Active power exported to the upstream grid (GCP power, positive = export).
    double export_power() const { return -grid_power.real(); }
    Vec v_mag() const { return v.cwiseAbs(); }
    Vec i_mag() const { return i.cwiseAbs(); }
};

// Complex bus admittance matrix (series branches only).
CMat admittance_matrix(const NetworkDescription& net);

// Newton-Raphson in polar coordinates. `injection` holds net complex injection
// per bus (generation positive); the slack entry is a local injection at the
// slack bus. Throws SolverError on non-convergence.
PowerFlowSolution solve_power_flow(const NetworkDescription& net, const CVec& injection, double v_slack,
                                   const PowerFlowOptions& opt = {});
// Warm-started variant (initial voltage guess).
PowerFlowSolution solve_power_flow(const NetworkDescription& net, const CMat& ybus, const CVec& injection,
                                   double v_slack, const CVec& v_init, const PowerFlowOptions& opt = {});

/// Affine surrogate around one operating point. Columns index the stacked bus
/// injections [p_1..p_N, q_1..q_N] in pu.
struct LinearGridStep {
    CVec operating_point;  // bus injections at expansion
    double p0 = 0.0;       // GCP export at expansion (offset b)
    Vec g;                 // d p0 / d[p;q]
    Vec v;                 // |v| at expansion (offset w)
    Mat kv;                // d|v| / d[p;q]
    Vec i;                 // |i| at expansion (offset d)
    Mat ki;                // d|i| / d[p;q]
};

struct LinearGridModel {
    double v_slack = 1.0;
    std::vector<LinearGridStep> steps;

    int horizon() const { return static_cast<int>(steps.size()); }
};

struct LinearizeOptions {
    double step = 1e-4;  // central finite-difference perturbation, pu
    Exec exec = Exec::Parallel;
    PowerFlowOptions pf{1e-12, 30};
};

// One model per column of `operating_points` (N x T bus injections).
LinearGridModel linearize(const NetworkDescription& net, const CMat& operating_points, double v_slack,
                          const LinearizeOptions& opt = {});

/// G = D B1^T with [B1 B2] orthonormal, B1 spanning the row space of G.
struct BasisDecomposition {
    Mat b1;
    Mat b2;
    Mat d;
    double condition = 1.0;  // 2-norm condition number of D
};

// Rank-revealing QR of G^T. Throws ValidationError on rank deficiency or cond(D) > max_condition.
BasisDecomposition reduce_equalities(const Mat& g, double max_condition = 1e12);

}  // namespace flexcap
