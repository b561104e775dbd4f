#pragma once

// Independent per-feeder aggregation with robust slack-voltage rows and the
// combination of feeder ellipsoids under the substation transformer rating.
//
// The inter-feeder policy is time-diagonal: substation activation xi(t) of a
// service reaches feeder f as split(f, t) * xi(t), so the feeder activation is
// xi_f(t) = split(f, t) / E_f(t) * xi(t).

#include "flexcap/aggregator.hpp"
#include "flexcap/feeder.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace flexcap {

struct FeederCase {
    FeederModel model;
    UncertaintySet uset = UncertaintySet::none();
    std::vector<ServiceSpec> services;
    BaseloadMode baseload;
    bool network_rows = true;
};

struct FeederBundle {
    std::vector<FeederCase> feeders;
    std::vector<ServiceSpec> services;  // substation offer: name, kind, price, block length
    double delta = 0.0;                 // slack-voltage half range, pu
    double transfo_export_max = 1e300;  // kW, export direction
    double transfo_import_max = 1e300;  // kW, import direction (positive)

    void validate() const;
};

// Slack voltages used for a feeder when the substation voltage may move by +-delta.
std::vector<double> slack_voltages(double delta);

// Solves every feeder (concurrently under Exec::Parallel). Infeasible feeders raise InfeasibleError naming them.
std::vector<AggregationResult> solve_feeders(const FeederBundle& bundle, Exec exec = Exec::Parallel,
                                             const conic::Tolerances& tol = {});

struct CombinedService {
    std::string name;
    ServiceKind kind = ServiceKind::Symmetric;
    Vec price;
    Vec e_kw;    // substation E^s
    Mat split;   // feeders x T, kW of feeder GCP power per unit substation activation
};

struct CombinedResult {
    int horizon = 0;
    std::vector<std::string> feeder_names;
    std::vector<AggregationResult> feeders;
    std::vector<CombinedService> services;
    Mat base_min_kw;  // feeders x T, baseload GCP range
    Mat base_max_kw;
    double transfo_export_max = 0.0;
    double transfo_import_max = 0.0;
    double objective = 0.0;
    int cones = 0;
    conic::SolveStats stats;

    const CombinedService& service(const std::string& name) const;
    // Feeder activation for each feeder service given the substation activation.
    std::vector<Activation> feeder_activations(const Activation& a) const;
};

CombinedResult combine_feeders(std::vector<AggregationResult> feeders, const FeederBundle& bundle,
                               const conic::Tolerances& tol = {});

struct ChainDisaggregation {
    std::vector<Activation> feeder_activation;
    std::vector<Disaggregation> feeder;
    Vec transformer_kw;  // total GCP export per step
};

// Throws InvariantError when a feeder activation leaves its unit ball by more than 1e-8.
ChainDisaggregation disaggregate_chain(const CombinedResult& c, const Activation& a, const std::vector<Vec>& zeta);

nlohmann::json to_json(const CombinedResult& c);

}  // namespace flexcap
