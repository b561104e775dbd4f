#pragma once

// Robust multi-service flexibility aggregation at the grid connection point.
//
// Injection columns are time-major: column (t, d, p|q) = t * 2D + (q ? D : 0) + d
// for D resources. Every service s offers an ellipsoid E^s (diagonal, kW) at the
// GCP and disaggregates activations xi through a policy P^s (n x T) with
// G P^s = E^s; P^s = B1 D^{-1} E^s + B2 K^s in the basis of the slack-power row.

#include "flexcap/conic.hpp"
#include "flexcap/network.hpp"
#include "flexcap/resources.hpp"
#include "flexcap/uncertainty.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace flexcap {

enum class ServiceKind { Symmetric, Up, Down };
std::string to_string(ServiceKind k);
ServiceKind service_kind_from_string(const std::string& s);

struct ServiceSpec {
    std::string name;
    ServiceKind kind = ServiceKind::Symmetric;
    Vec price;    // currency per kW of capacity per step
    Vec benefit;  // g; empty means equal to price
    int block_length = 1;
    std::vector<bool> eligible;  // per resource; empty means all
    Mat cost;                    // resources x T, currency per kW of policy per step
    double energy_factor = 1.0;  // scales this service's share of the storage rows

    const Vec& benefit_or_price() const { return benefit.size() > 0 ? benefit : price; }
    void validate(int horizon, int num_ders) const;
};

enum class BaseloadKind { Uncontrolled, Controlled, SelfDispatch };
std::string to_string(BaseloadKind k);
BaseloadKind baseload_kind_from_string(const std::string& s);

struct BaseloadMode {
    BaseloadKind kind = BaseloadKind::Uncontrolled;
    Vec energy_cost;  // controlled: currency per kWh per step
    Mat wear_cost;    // controlled: resources x T, currency per kW of |baseline| per step (optional)
    Vec e0;           // self-dispatch: GCP export centre, kW
    Mat e0_shape;     // self-dispatch: E0, kW (T x T)

    void validate(int horizon, int num_ders) const;
};

struct AggregationInput {
    NetworkDescription net;
    std::vector<LinearGridModel> grids;  // [0] is nominal; extra models duplicate voltage/current rows
    DerFleet fleet;
    std::vector<int> der_bus;
    std::vector<Mat> bus_zeta_map;  // per step: [p; q] bus injection (pu) per unit zeta (2N x dim)
    ZetaLayout layout;
    UncertaintySet uset = UncertaintySet::none();
    std::vector<ServiceSpec> services;
    BaseloadMode baseload;
    bool network_rows = true;
    double dt = 1.0;

    int horizon() const { return grids.empty() ? 0 : grids[0].horizon(); }
    int num_ders() const { return fleet.size(); }
    int num_columns() const { return 2 * num_ders() * horizon(); }
    int zeta_dim() const { return layout.dim(); }
    int column(int t, int der, bool reactive) const {
        return t * 2 * num_ders() + (reactive ? num_ders() : 0) + der;
    }
    void validate() const;
};

enum class RowCategory { VoltageUpper, VoltageLower, CurrentUpper, CurrentLower, PowerBox, Storage };
std::string to_string(RowCategory c);

/// Stacked linear model  W u <= z0 + Mz zeta  over all injection columns.
struct ConstraintSystem {
    SpRowMat w;
    Vec z0;
    Mat mz;
    std::vector<std::string> labels;
    std::vector<RowCategory> category;
    std::vector<int> time;
    std::vector<int> der;  // -1 for network rows

    int rows() const { return static_cast<int>(z0.size()); }
    bool storage(int i) const { return category[i] == RowCategory::Storage; }
};

ConstraintSystem assemble_constraints(const AggregationInput& in);

/// GCP export model p0 = b + G u + Mb zeta at the nominal linearization.
struct GcpModel {
    Mat g;   // T x n
    Vec b;   // T
    Mat mb;  // T x dim
};
GcpModel gcp_model(const AggregationInput& in);

struct ServiceIndex {
    conic::VarBlock e;
    conic::VarBlock p;
    conic::VarBlock alpha;
    conic::VarBlock eps;
    std::vector<int> columns;  // eligible injection columns, row order of p
};

struct IndexMap {
    std::vector<ServiceIndex> services;
    conic::VarBlock lambda;
    conic::VarBlock lambda_box;
    conic::VarBlock p0b;
    conic::VarBlock ub;
    conic::VarBlock ub_abs;
    conic::VarBlock gamma;
    conic::VarBlock l;
    conic::VarBlock k0;
    conic::VarBlock alpha0;
    std::vector<int> abs_columns;
    int n_s = 0;  // service sets counted for cones (incl. self-dispatch baseload)
    int n_u = 0;  // ellipsoidal uncertainty sets with nonzero maps
};

struct AggregationProblem {
    std::shared_ptr<const AggregationInput> input;
    ConstraintSystem system;
    GcpModel gcp;
    conic::ConicProgram program;
    IndexMap index;
    Vec lambda_const;  // per-row uncertainty term folded into constants (hyperbox without recourse), pu
    double power_scale = 1.0;  // pu per program power unit
};

AggregationProblem build_problem(std::shared_ptr<const AggregationInput> input);

struct ServiceResult {
    std::string name;
    ServiceKind kind = ServiceKind::Symmetric;
    Vec e_kw;          // diagonal of E^s
    Mat policy;        // n x T, full injection space (zero rows for ineligible columns)
    Mat k;             // B2^T restricted to eligible columns, per step stacked
    Vec alpha;         // per row
    Vec cost_slack;    // g_t E_t - sum_j c_j P_jt, currency
    Vec benefit;       // g
    Vec price;
    Mat cost;          // resources x T
    double energy_factor = 1.0;
    double d_condition = 1.0;  // worst cond(D^s_t)
};

struct AggregationResult {
    int horizon = 0;
    int num_ders = 0;
    double base_kva = 1.0;
    double dt = 1.0;
    std::vector<std::string> der_names;
    std::vector<ServiceResult> services;
    BaseloadKind baseload = BaseloadKind::Uncontrolled;
    Vec b_kw;          // nominal GCP export
    Mat mb_kw;         // GCP export per unit zeta
    Vec p0b_kw;        // controlled
    Vec ub;            // controlled, pu
    Vec gamma;         // self-dispatch, pu
    Mat l;             // self-dispatch, n x dim
    Mat k0;            // self-dispatch, n x T
    Vec e0_kw;
    Mat e0_shape_kw;
    double objective = 0.0;
    int cones = 0;
    int cones_expected = 0;
    std::string fingerprint;
    conic::SolveStats stats;

    int num_columns() const { return 2 * num_ders * horizon; }
    const ServiceResult& service(const std::string& name) const;
    int service_index(const std::string& name) const;  // -1 if absent
    // Nominal baseline injections (zeta = 0, no activation).
    Vec baseline() const;
    // GCP baseload export range over the uncertainty set (kW): {min, max} per step.
    std::pair<Vec, Vec> baseload_range(const UncertaintySet& uset) const;
};

// Solves and re-verifies the result invariants. Throws InfeasibleError / SolverError / InvariantError.
AggregationResult solve_aggregation(const AggregationProblem& problem, const conic::Tolerances& tol = {});
AggregationResult aggregate(std::shared_ptr<const AggregationInput> input, const conic::Tolerances& tol = {});

struct Activation {
    std::vector<Vec> xi;  // per service, length T
    Vec xi0;              // self-dispatch baseload activation (empty = 0)

    static Activation zeros(const AggregationResult& r);
};

struct Disaggregation {
    Vec baseline;                // pu per column
    std::vector<Vec> service;    // pu per column, per service
    Vec total;                   // pu per column
    std::vector<Vec> gcp_service_kw;  // E^s xi^s
    Vec gcp_baseload_kw;

    // Injection of one resource over the horizon (kW), active or reactive.
    Vec der_kw(const AggregationResult& r, int der, bool reactive) const;
    // Storage-relevant injection: services weighted by their energy factor.
    Vec energy_weighted() const;
    std::vector<double> weights;
};

// Throws ValidationError when an up (down) service receives a negative (positive) activation entry.
Disaggregation disaggregate(const AggregationResult& r, const Activation& a, const Vec& zeta);

struct FlexibilityValue {
    double benefit = 0.0;
    double cost = 0.0;
    double net = 0.0;
};
FlexibilityValue flexibility_value(const AggregationResult& r, const Activation& a);

nlohmann::json to_json(const AggregationResult& r);
AggregationResult aggregation_result_from_json(const nlohmann::json& j);

}  // namespace flexcap
