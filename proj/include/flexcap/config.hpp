#pragma once

// Run configuration for the command-line front end. Everything a command needs
// is loaded and checked here before any computation starts.

#include "flexcap/aggregator.hpp"
#include "flexcap/feeder.hpp"
#include "flexcap/multifeeder.hpp"
#include "flexcap/uncertainty.hpp"
#include "flexcap/validate.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace flexcap {

// CSV `t,service,price` with a `# dt_hours=<h>` header line; prices in currency per kW per period.
struct PriceTable {
    double dt_hours = 1.0;
    std::map<std::string, Vec> series;  // per service, one entry per period

    // Series on a horizon of `horizon` steps of `dt` hours. Capacity prices scale with the step length,
    // energy prices (per kWh) do not.
    Vec on_horizon(const std::string& service, int horizon, double dt, bool per_step) const;
};

PriceTable load_prices(const std::string& path);

struct ServiceConfig {
    std::string name;
    ServiceKind kind = ServiceKind::Symmetric;
    int block_steps = 1;
    std::vector<std::string> eligible;  // empty: all resources
    bool fcr = false;                   // energy factor and cost from FCR statistics
    double price_scale = 1.0;
    double energy_factor = 1.0;         // explicit value, replaced for FCR services
    double throughput_factor = 1.0;
    bool battery_cost = true;           // charge battery cycle cost per kW of capacity
};

struct BaseloadConfig {
    BaseloadKind kind = BaseloadKind::Uncontrolled;
    std::string energy_price;  // price-table entry (currency per kWh), controlled mode
    double energy_price_value = 0.0;
    Vec e0_kw;                 // self-dispatch
    double e0_width_kw = 0.0;  // self-dispatch: E0 = width * I
};

struct RunConfig {
    std::string path;  // config file, paths resolve against its directory
    std::string name;
    std::string network;
    std::string fleet;
    std::string prosumers;
    std::string scenarios;
    std::string prices;
    std::string frequency;  // optional
    std::string uncertainty_file;  // optional precomputed set
    int horizon = 0;
    double dt_hours = 1.0;
    std::vector<std::string> drivers;  // empty: taken from the scenario file
    int in_sample = -1;                // first rows in-sample when the file has no split column
    std::vector<ServiceConfig> services;
    BaseloadConfig baseload;
    std::string uncertainty_kind = "gaussian";
    double epsilon = 0.1;
    bool network_rows = true;
    double delta = 0.0;
    conic::Tolerances tolerances;
    ValidateOptions validation;
    std::string validation_scenarios = "out";  // out | in | in-set
    int validation_samples = 1000;             // in-set draws
    double fcr_rho = 0.25;
    double fcr_throughput = 0.5;
    double fcr_block_hours = 4.0;
    std::uint64_t seed = 1;
    std::string output = "out";

    // Structural checks and file existence; throws ValidationError or ParseError.
    void validate() const;
};

RunConfig load_run_config(const std::string& path);

// Loaded inputs of one feeder run.
struct RunInputs {
    FeederModel feeder;
    ScenarioSet scenarios;
    std::vector<ServiceSpec> services;
    BaseloadMode baseload;
    FcrEnergyStats fcr;  // empty when no frequency series is configured
};

RunInputs load_run_inputs(const RunConfig& cfg);
UncertaintySet build_uncertainty_set(const RunConfig& cfg, const ScenarioSet& scenarios, Exec exec = Exec::Parallel);
InputOptions input_options(const RunConfig& cfg);

struct BundleConfig {
    std::string path;
    std::vector<std::string> feeders;  // run-config paths
    double delta = 0.0;
    double transfo_export_max = 1e300;
    double transfo_import_max = 1e300;
    int containment_samples = 500;
    std::uint64_t seed = 1;
    std::string output = "out";
    conic::Tolerances tolerances;

    void validate() const;
};

BundleConfig load_bundle_config(const std::string& path);

struct BundleInputs {
    std::vector<RunConfig> configs;
    std::vector<RunInputs> runs;
    FeederBundle bundle;
};

// Every feeder must offer the same services; the substation offer copies the first feeder's.
BundleInputs load_bundle_inputs(const BundleConfig& cfg, Exec exec = Exec::Parallel);

}  // namespace flexcap
