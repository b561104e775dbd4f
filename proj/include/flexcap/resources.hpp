#pragma once

// Linear capability blocks for batteries, heat pumps and PV over a horizon,
// plus FCR energy statistics and battery cycle costs.
//
// Block columns are the resource's own injections [p_0..p_{T-1}, q_0..q_{T-1}]
// in pu (generation positive). Rows read  W x <= z0 + Mz * zeta.

#include "flexcap/common.hpp"
#include "flexcap/zeta.hpp"

#include <string>
#include <variant>
#include <vector>

namespace flexcap {

enum class RowKind { PowerBox, Storage };

struct LinearConstraintBlock {
    Mat w;
    Vec z0;
    Mat mz;
    std::vector<std::string> labels;
    std::vector<RowKind> kinds;
    std::vector<int> times;

    int rows() const { return static_cast<int>(z0.size()); }
    void add_row(const Vec& coeffs, double rhs, const Vec& zeta_map, std::string label, RowKind kind, int t);
    // Largest violation (W x - z0 - Mz zeta), per row.
    Vec slack(const Vec& x, const Vec& zeta) const;
};

struct BessSpec {
    std::string name;
    std::string bus;
    double p_min = 0.0;  // kW, injection
    double p_max = 0.0;
    double q_min = 0.0;  // kVAr
    double q_max = 0.0;
    double soe_min = 0.0;  // kWh
    double soe_max = 0.0;
    double soe_0 = 0.0;
    double c_inv = 0.0;
    double n_cycles = 1.0;
    double dt = 1.0;  // h

    void validate() const;
};

struct HpSpec {
    std::string name;
    std::string bus;
    double p_min = 0.0;  // kW electric consumption
    double p_max = 0.0;
    double m_bt = 1.0;    // kg
    double l_bt = 0.0;    // kW
    double a_hp = 3.0;    // kW heat per kW electric
    double q0_hp = 0.0;   // kW
    double h_demand = 0.0;  // kW/K
    double t_comfort = 293.15;
    double t_min = 0.0;
    double t_max = 0.0;
    double t_0 = 0.0;
    Vec t_env;  // K per step
    Mat h_map;  // T x dim(zeta), K per unit of zeta
    double dt = 1.0;

    void validate(int horizon) const;
};

struct PvSpec {
    std::string name;
    std::string bus;
    Vec mpp;    // kW per step
    Mat m_pv;   // T x dim(zeta), kW per unit of zeta
    bool curtailable = true;

    void validate(int horizon) const;
};

// Block-averages or repeats a profile onto `horizon` steps (lengths must divide one another).
Vec resample(const Vec& profile, int horizon);

using DerSpec = std::variant<BessSpec, HpSpec, PvSpec>;

const std::string& der_name(const DerSpec& d);
const std::string& der_bus(const DerSpec& d);
std::string der_kind(const DerSpec& d);

struct DerFleet {
    std::vector<DerSpec> ders;
    int size() const { return static_cast<int>(ders.size()); }
    int storage_count() const;  // units carrying a storage state (BESS, HP)
};

// Reads a JSON array of resource records (kind = bess|hp|pv) in kW/kWh/K.
// Uncertainty references ({"driver": name, "scale": s}) are resolved against `layout`.
DerFleet load_fleet(const std::string& path, const ZetaLayout& layout, double dt);

LinearConstraintBlock bess_block(const BessSpec& spec, int horizon, double base_kva, int zeta_dim = 0);
LinearConstraintBlock hp_block(const HpSpec& spec, int horizon, double base_kva);
// PV columns are the adjustment relative to the available power (curtailment <= 0);
// the available power itself is prosumption at the PV bus.
LinearConstraintBlock pv_block(const PvSpec& spec, int horizon, double base_kva);
LinearConstraintBlock der_block(const DerSpec& spec, int horizon, double base_kva, int zeta_dim);

// Exact state recursions for validation (kW in, kWh / K out; T+1 entries).
Vec simulate_soe(const BessSpec& spec, const Vec& p_kw);
Vec simulate_tank(const HpSpec& spec, const Vec& p_kw, const Vec& zeta);

// Kelvin change of the tank per kWh of net heat.
double tank_factor(const HpSpec& spec);

struct FrequencySample {
    double time = 0.0;  // s
    double hz = 50.0;
};

struct FcrEnergyStats {
    std::vector<double> bias;        // per block
    std::vector<double> throughput;  // per block
    double bias_p95 = 0.0;
    double throughput_p95 = 0.0;
};

// Droop p = clamp((50 - f) / 0.2, -1, 1), held over each sampling interval.
FcrEnergyStats fcr_energy_requirements(const std::vector<FrequencySample>& series, double block_hours);
// CSV with columns timestamp,hz; timestamp in seconds or ISO-8601 (UTC).
std::vector<FrequencySample> load_frequency_series(const std::string& path);

double cycle_cost(double c_inv, double n_cycles);
// Cost per kW of offered capacity per step: cycle cost * throughput / (2 * usable capacity).
double bess_capacity_cost(const BessSpec& spec, double throughput_factor);

double percentile(std::vector<double> values, double q);

}  // namespace flexcap
