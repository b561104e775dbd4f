#pragma once

// One feeder's physical model: network, resources and uncertain prosumption,
// and the construction of aggregation inputs from it.

#include "flexcap/aggregator.hpp"
#include "flexcap/network.hpp"
#include "flexcap/parallel.hpp"
#include "flexcap/resources.hpp"
#include "flexcap/zeta.hpp"

#include <memory>
#include <string>
#include <vector>

namespace flexcap {

/// Uncontrolled consumption at a bus: load_kw + scale * zeta[driver, t] (kW), q = q_ratio * p.
struct Prosumer {
    std::string bus;
    Vec load_kw;
    double q_ratio = 0.0;
    std::string driver;  // empty: deterministic
    double scale = 0.0;
};

// JSON array of {"bus", "load_kw" (scalar or series), "profile" (optional multiplier, resampled),
// "q_ratio", "uncertainty": {"driver", "scale"}}.
std::vector<Prosumer> load_prosumers(const std::string& path, const ZetaLayout& layout);

struct FeederModel {
    std::string name;
    NetworkDescription net;
    DerFleet fleet;
    std::vector<Prosumer> prosumers;
    ZetaLayout layout;
    double dt = 1.0;

    int horizon() const { return layout.horizon; }
    std::vector<int> der_buses() const;
    // Nominal bus injections (pu, N x T): PV available power minus prosumer load.
    CMat nominal_injections() const;
    // Per step: bus injection [p; q] (pu) per unit zeta.
    std::vector<Mat> bus_zeta_maps() const;
    // Bus injections (pu, N x T) for resource columns u (pu) at realization zeta.
    CMat injections(const Vec& u, const Vec& zeta) const;
    void validate() const;
};

struct InputOptions {
    std::vector<double> slack_voltages{1.0};  // one linearization per entry
    bool network_rows = true;
    Exec exec = Exec::Parallel;
};

std::shared_ptr<AggregationInput> make_input(const FeederModel& feeder, const UncertaintySet& uset,
                                             std::vector<ServiceSpec> services, BaseloadMode baseload,
                                             const InputOptions& opt = {});

}  // namespace flexcap
