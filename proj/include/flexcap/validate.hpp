#pragma once

// Out-of-sample Monte Carlo validation of aggregation results against exact
// power flow and exact resource recursions.

#include "flexcap/aggregator.hpp"
#include "flexcap/feeder.hpp"
#include "flexcap/multifeeder.hpp"
#include "flexcap/parallel.hpp"
#include "flexcap/uncertainty.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace flexcap {

enum class Category { Voltage, Current, Power, Soe, Temperature, PvCap, PfDivergence };
inline constexpr int kNumCategories = 7;
std::string to_string(Category c);
bool is_resource(Category c);

enum class Strategy { Zero, MaxFlex, Random, PerTimeExtreme };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Admissible activation per service (quadrant restrictions honoured, ||xi|| <= 1).
Activation select_activation(const AggregationResult& r, Strategy s, std::mt19937_64& rng);
// Uniform point of the unit ball (or its sphere).
Vec unit_ball_point(std::mt19937_64& rng, int dim, bool boundary = false);
// Uniform point of an ellipsoid, or of a box.
Vec sample_in_set(const UncertaintySet& set, std::mt19937_64& rng);

struct ValidateOptions {
    double rel_tol = 1e-4;     // network limits
    double allowance = 0.02;   // relative linearization allowance on network limits
    double resource_tol = 1e-6;  // kW, kWh, K (scaled by max(1, |limit|))
    Strategy strategy = Strategy::MaxFlex;
    std::uint64_t seed = 1;
    Exec exec = Exec::Parallel;
    bool trajectories = true;
    PowerFlowOptions pf{1e-10, 40};
};

struct ScenarioOutcome {
    int index = 0;
    bool in_set = true;
    double gauge = 0.0;
    std::array<bool, kNumCategories> violated{};
    std::array<double, kNumCategories> worst{};  // largest excess over the tolerated limit (relative for network)
    double current_delta = 0.0;                  // max |exact - linear| / rating
    std::vector<Vec> soe;                        // per battery, kWh, T+1
    std::vector<Vec> tank;                       // per heat pump, K, T+1
    Vec gcp_kw;

    bool any() const;
    bool resource_violation() const;
};

struct ViolationReport {
    std::uint64_t seed = 0;
    std::string strategy;
    int scenarios = 0;
    int outside = 0;
    int violations = 0;
    int in_set_breaches = 0;  // in-set scenarios with a resource violation or a network excess
    std::array<int, kNumCategories> category_count{};
    std::array<double, kNumCategories> worst{};
    double max_current_delta = 0.0;
    std::vector<ScenarioOutcome> outcomes;
    std::vector<std::string> battery_names;
    std::vector<std::string> heat_pump_names;

    double outside_rate() const { return scenarios ? static_cast<double>(outside) / scenarios : 0.0; }
    double violation_rate() const { return scenarios ? static_cast<double>(violations) / scenarios : 0.0; }
};

// Evaluates one realization: disaggregation, exact resource recursions and exact power flow per step.
ScenarioOutcome evaluate_scenario(const AggregationResult& r, const FeederModel& feeder, const LinearGridModel& grid,
                                  const Activation& a, const Vec& zeta, const ValidateOptions& opt);

// `zeta_rows` are deviations from the forecast (N x dim). Scenario k uses rng seeded from (seed, k).
ViolationReport monte_carlo_validate(const AggregationResult& r, const FeederModel& feeder, const UncertaintySet& uset,
                                     const Mat& zeta_rows, const ValidateOptions& opt = {});

// Substation activations through disaggregate_chain; one shared realization for all feeders.
ViolationReport monte_carlo_validate_chain(const CombinedResult& c, const std::vector<FeederModel>& feeders,
                                           const std::vector<UncertaintySet>& usets, const Mat& zeta_rows,
                                           const ValidateOptions& opt = {});

struct ContainmentReport {
    int samples = 0;
    double max_feeder_norm = 0.0;      // largest ||xi_f|| over feeders, services and samples
    double max_export_excess = -HUGE_VAL;  // kW over the transformer export rating
    double max_import_excess = -HUGE_VAL;  // kW over the transformer import rating

    bool ok(double tol_kw = 1e-6) const {
        return max_feeder_norm <= 1.0 + 1e-8 && max_export_excess <= tol_kw && max_import_excess <= tol_kw;
    }
};

// Samples substation activations (interior and boundary, all strategies) with in-set realizations per feeder
// and records how far the chain leaves the feeder balls and the transformer rating.
ContainmentReport check_containment(const CombinedResult& c, const std::vector<UncertaintySet>& usets, int samples,
                                    std::uint64_t seed);
nlohmann::json to_json(const ContainmentReport& r);

nlohmann::json to_json(const ViolationReport& r, bool per_scenario = false);
// One row per scenario: index, in_set, gauge, violated, one flag per category.
std::string to_csv(const ViolationReport& r);

struct ComparisonRow {
    std::string kind;
    double epsilon = 0.0;
    double achieved_coverage = 0.0;
    double objective = 0.0;
    double violation_rate = 0.0;
    double outside_rate = 0.0;
    std::string error;  // empty when the row solved
};

struct CompareCase {
    std::string kind;  // hyperbox | coverage | mvee | gaussian
    double epsilon = 0.1;
};

// Fits each set on the in-sample rows, aggregates, and validates on the out-of-sample rows.
std::vector<ComparisonRow> compare_uncertainty_sets(const FeederModel& feeder, const ScenarioSet& scenarios,
                                                    const std::vector<CompareCase>& cases,
                                                    const std::vector<ServiceSpec>& services,
                                                    const BaseloadMode& baseload, const InputOptions& input,
                                                    const ValidateOptions& opt = {});
UncertaintySet fit_set(const std::string& kind, const Mat& rows, double epsilon, Exec exec = Exec::Parallel);
std::string to_csv(const std::vector<ComparisonRow>& rows);

}  // namespace flexcap
