#include "flexcap/resources.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace flexcap {

namespace {

constexpr double kWaterHeat = 4200.0;  // J / (kg K)

std::string row_label(const std::string& name, const char* what, int t) {
    return name + ":" + what + "[" + std::to_string(t) + "]";
}

// Adds  coef * x <= rhs  unless rhs is +inf.
void add_bound(LinearConstraintBlock& b, int cols, int col, double coef, double rhs, int zeta_dim,
               const std::string& label, int t) {
    if (std::isinf(rhs) && rhs > 0) return;
    Vec w = Vec::Zero(cols);
    w(col) = coef;
    b.add_row(w, rhs, Vec::Zero(zeta_dim), label, RowKind::PowerBox, t);
}

LinearConstraintBlock empty_block(int horizon, int zeta_dim) {
    LinearConstraintBlock b;
    b.w.resize(0, 2 * horizon);
    b.z0.resize(0);
    b.mz.resize(0, zeta_dim);
    return b;
}

}  // namespace

void LinearConstraintBlock::add_row(const Vec& coeffs, double rhs, const Vec& zeta_map, std::string label,
                                    RowKind kind, int t) {
    if (!std::isfinite(rhs)) throw ValidationError("constraint row '" + label + "' has a non-finite bound");
    const int r = rows();
    w.conservativeResize(r + 1, coeffs.size());
    w.row(r) = coeffs.transpose();
    z0.conservativeResize(r + 1);
    z0(r) = rhs;
    mz.conservativeResize(r + 1, zeta_map.size());
    mz.row(r) = zeta_map.transpose();
    labels.push_back(std::move(label));
    kinds.push_back(kind);
    times.push_back(t);
}

Vec LinearConstraintBlock::slack(const Vec& x, const Vec& zeta) const {
    Vec rhs = z0;
    if (mz.cols() > 0) rhs += mz * zeta;
    return rhs - w * x;
}

void BessSpec::validate() const {
    if (!(p_min <= 0.0 && 0.0 <= p_max)) throw ValidationError("BESS '" + name + "': need p_min <= 0 <= p_max");
    if (!(q_min <= q_max)) throw ValidationError("BESS '" + name + "': need q_min <= q_max");
    if (!(soe_min <= soe_0 && soe_0 <= soe_max)) {
        throw ValidationError("BESS '" + name + "': need SOE_min <= SOE_0 <= SOE_max");
    }
    if (!(n_cycles > 0.0)) throw ValidationError("BESS '" + name + "': rated cycles must be positive");
    if (!(dt > 0.0)) throw ValidationError("BESS '" + name + "': time step must be positive");
}

void HpSpec::validate(int horizon) const {
    if (!(m_bt > 0.0)) throw ValidationError("HP '" + name + "': tank mass must be positive");
    if (!(t_min <= t_0 && t_0 <= t_max)) throw ValidationError("HP '" + name + "': need T_min <= T_0 <= T_max");
    if (!(p_min >= 0.0 && p_min <= p_max)) throw ValidationError("HP '" + name + "': need 0 <= p_min <= p_max");
    if (t_env.size() != horizon) throw ValidationError("HP '" + name + "': environment series length != horizon");
    if (h_map.size() > 0 && h_map.rows() != horizon) throw ValidationError("HP '" + name + "': H map has wrong rows");
}

void PvSpec::validate(int horizon) const {
    if (mpp.size() != horizon) throw ValidationError("PV '" + name + "': MPP series length != horizon");
    if ((mpp.array() < 0.0).any()) throw ValidationError("PV '" + name + "': MPP series must be nonnegative");
    if (m_pv.size() > 0 && m_pv.rows() != horizon) throw ValidationError("PV '" + name + "': map has wrong rows");
}

const std::string& der_name(const DerSpec& d) {
    return std::visit([](const auto& s) -> const std::string& { return s.name; }, d);
}

const std::string& der_bus(const DerSpec& d) {
    return std::visit([](const auto& s) -> const std::string& { return s.bus; }, d);
}

std::string der_kind(const DerSpec& d) {
    switch (d.index()) {
        case 0: return "bess";
        case 1: return "hp";
        default: return "pv";
    }
}

int DerFleet::storage_count() const {
    int n = 0;
    for (const auto& d : ders) n += d.index() != 2;
    return n;
}

LinearConstraintBlock bess_block(const BessSpec& spec, int horizon, double base_kva, int zeta_dim) {
    spec.validate();
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    const int cols = 2 * horizon;
    LinearConstraintBlock b = empty_block(horizon, zeta_dim);
    for (int t = 0; t < horizon; ++t) {
        add_bound(b, cols, t, 1.0, spec.p_max / base_kva, zeta_dim, row_label(spec.name, "p_max", t), t);
        add_bound(b, cols, t, -1.0, -spec.p_min / base_kva, zeta_dim, row_label(spec.name, "p_min", t), t);
        add_bound(b, cols, horizon + t, 1.0, spec.q_max / base_kva, zeta_dim, row_label(spec.name, "q_max", t), t);
        add_bound(b, cols, horizon + t, -1.0, -spec.q_min / base_kva, zeta_dim, row_label(spec.name, "q_min", t),
                  t);
    }
    // SOE after step t: SOE_0 - dt * sum_{k<=t} p_k, rows in pu-hours
    for (int t = 0; t < horizon; ++t) {
        Vec cum = Vec::Zero(cols);
        cum.head(t + 1).setConstant(spec.dt);
        if (std::isfinite(spec.soe_max)) {
            b.add_row(-cum, (spec.soe_max - spec.soe_0) / base_kva, Vec::Zero(zeta_dim),
                      row_label(spec.name, "soe_max", t), RowKind::Storage, t);
        }
        if (std::isfinite(spec.soe_min)) {
            b.add_row(cum, (spec.soe_0 - spec.soe_min) / base_kva, Vec::Zero(zeta_dim),
                      row_label(spec.name, "soe_min", t), RowKind::Storage, t);
        }
    }
    return b;
}

double tank_factor(const HpSpec& spec) { return 3.6e6 / (kWaterHeat * spec.m_bt); }

LinearConstraintBlock hp_block(const HpSpec& spec, int horizon, double base_kva) {
    spec.validate(horizon);
    const int cols = 2 * horizon;
    const int zdim = static_cast<int>(spec.h_map.cols());
    LinearConstraintBlock b = empty_block(horizon, zdim);
    for (int t = 0; t < horizon; ++t) {
        // injection p = -p_hp
        add_bound(b, cols, t, -1.0, spec.p_max / base_kva, zdim, row_label(spec.name, "p_max", t), t);
        add_bound(b, cols, t, 1.0, -spec.p_min / base_kva, zdim, row_label(spec.name, "p_min", t), t);
        add_bound(b, cols, horizon + t, 1.0, 0.0, zdim, row_label(spec.name, "q_max", t), t);
        add_bound(b, cols, horizon + t, -1.0, 0.0, zdim, row_label(spec.name, "q_min", t), t);
    }
    // T_{t+1} = T_0 + f dt sum_{k<=t} (a p_hp_k + Q0 - l - h (Tc - Tenv_k - H_k zeta))
    const double f = tank_factor(spec) * spec.dt;
    Vec cum = Vec::Zero(cols);
    double drift = 0.0;
    Vec zeta_cum = Vec::Zero(zdim);
    for (int t = 0; t < horizon; ++t) {
        cum(t) = -f * spec.a_hp * base_kva;  // per pu injection
        drift += f * (spec.q0_hp - spec.l_bt - spec.h_demand * (spec.t_comfort - spec.t_env(t)));
        if (zdim > 0) zeta_cum += f * spec.h_demand * spec.h_map.row(t).transpose();
        // T_{t+1} = T_0 + drift + cum.x + zeta_cum.zeta
        b.add_row(cum, spec.t_max - spec.t_0 - drift, -zeta_cum, row_label(spec.name, "temp_max", t),
                  RowKind::Storage, t);
        b.add_row(-cum, spec.t_0 + drift - spec.t_min, zeta_cum, row_label(spec.name, "temp_min", t),
                  RowKind::Storage, t);
    }
    return b;
}

LinearConstraintBlock pv_block(const PvSpec& spec, int horizon, double base_kva) {
    spec.validate(horizon);
    const int cols = 2 * horizon;
    const int zdim = static_cast<int>(spec.m_pv.cols());
    LinearConstraintBlock b = empty_block(horizon, zdim);
    for (int t = 0; t < horizon; ++t) {
        Vec w = Vec::Zero(cols);
        w(t) = 1.0;
        // p_pv = mpp + x:  p_pv <= mpp  and  p_pv >= 0 (p_pv >= mpp when not curtailable)
        b.add_row(w, 0.0, Vec::Zero(zdim), row_label(spec.name, "p_max", t), RowKind::PowerBox, t);
        if (spec.curtailable) {
            const Vec map = zdim > 0 ? Vec(spec.m_pv.row(t).transpose() / base_kva) : Vec::Zero(0);
            b.add_row(-w, spec.mpp(t) / base_kva, map, row_label(spec.name, "p_min", t), RowKind::PowerBox, t);
        } else {
            b.add_row(-w, 0.0, Vec::Zero(zdim), row_label(spec.name, "p_min", t), RowKind::PowerBox, t);
        }
        Vec wq = Vec::Zero(cols);
        wq(horizon + t) = 1.0;
        b.add_row(wq, 0.0, Vec::Zero(zdim), row_label(spec.name, "q_max", t), RowKind::PowerBox, t);
        b.add_row(-wq, 0.0, Vec::Zero(zdim), row_label(spec.name, "q_min", t), RowKind::PowerBox, t);
    }
    return b;
}

LinearConstraintBlock der_block(const DerSpec& spec, int horizon, double base_kva, int zeta_dim) {
    LinearConstraintBlock b;
    if (const auto* s = std::get_if<BessSpec>(&spec)) {
        b = bess_block(*s, horizon, base_kva, zeta_dim);
    } else if (const auto* h = std::get_if<HpSpec>(&spec)) {
        b = hp_block(*h, horizon, base_kva);
    } else {
        b = pv_block(std::get<PvSpec>(spec), horizon, base_kva);
    }
    if (b.mz.cols() == 0 && zeta_dim > 0) b.mz = Mat::Zero(b.rows(), zeta_dim);
    if (b.mz.cols() != zeta_dim) throw ValidationError("resource '" + der_name(spec) + "': uncertainty map width");
    return b;
}

Vec simulate_soe(const BessSpec& spec, const Vec& p_kw) {
    Vec soe(p_kw.size() + 1);
    soe(0) = spec.soe_0;
    for (Eigen::Index t = 0; t < p_kw.size(); ++t) soe(t + 1) = soe(t) - p_kw(t) * spec.dt;
    return soe;
}

Vec simulate_tank(const HpSpec& spec, const Vec& p_kw, const Vec& zeta) {
    Vec temp(p_kw.size() + 1);
    temp(0) = spec.t_0;
    const double f = tank_factor(spec) * spec.dt;
    for (Eigen::Index t = 0; t < p_kw.size(); ++t) {
        double t_env = spec.t_env(t);
        if (spec.h_map.size() > 0 && zeta.size() > 0) t_env += spec.h_map.row(t).dot(zeta);
        const double p_hp = -p_kw(t);
        const double q_demand = spec.h_demand * (spec.t_comfort - t_env);
        temp(t + 1) = temp(t) + f * (spec.a_hp * p_hp + spec.q0_hp - spec.l_bt - q_demand);
    }
    return temp;
}

double cycle_cost(double c_inv, double n_cycles) {
    if (!(n_cycles > 0.0)) throw ValidationError("rated cycles must be positive");
    return c_inv / n_cycles;
}

double bess_capacity_cost(const BessSpec& spec, double throughput_factor) {
    const double capacity = spec.soe_max - spec.soe_min;
    if (!(capacity > 0.0) || !std::isfinite(capacity)) return 0.0;
    return cycle_cost(spec.c_inv, spec.n_cycles) * throughput_factor * spec.dt / (2.0 * capacity);
}

// ---- fleet file -------------------------------------------------------------

namespace {

using nlohmann::json;

double num(const json& j, const char* key, double fallback = NAN) {
    if (!j.contains(key)) {
        if (std::isnan(fallback)) throw ValidationError(std::string("missing field '") + key + "'");
        return fallback;
    }
    const json& v = j.at(key);
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
    }
    return v.get<double>();
}

Vec series(const json& j, const char* key, int horizon, double fallback = NAN) {
    if (!j.contains(key)) {
        if (std::isnan(fallback)) throw ValidationError(std::string("missing field '") + key + "'");
        return Vec::Constant(horizon, fallback);
    }
    const json& v = j.at(key);
    if (v.is_number()) return Vec::Constant(horizon, v.get<double>());
    const auto vals = v.get<std::vector<double>>();
    try {
        return resample(Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size())), horizon);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("series '") + key + "': " + e.what());
    }
}

// {"driver": name, "scale": s, "relative": bool}  ->  T x dim map selecting scale * zeta[driver, t],
// multiplied by base(t) when relative.
Mat driver_map(const json& j, const char* key, const ZetaLayout& layout, const Vec& base = Vec()) {
    Mat m = Mat::Zero(layout.horizon, layout.dim());
    if (!j.contains(key)) return m;
    const json& ref = j.at(key);
    const std::string driver = ref.at("driver").get<std::string>();
    const double scale = ref.value("scale", 1.0);
    const bool relative = ref.value("relative", false);
    if (relative && base.size() != layout.horizon) throw ValidationError(std::string("'") + key + "' cannot be relative");
    for (int t = 0; t < layout.horizon; ++t) m(t, layout.index(driver, t)) = relative ? scale * base(t) : scale;
    return m;
}

}  // namespace

DerFleet load_fleet(const std::string& path, const ZetaLayout& layout, double dt) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path, e.what());
    }
    if (!doc.is_array()) throw ParseError(path, "fleet file must be a JSON array");
    DerFleet fleet;
    std::set<std::string> names;
    const int horizon = layout.horizon;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const json& r = doc[k];
        try {
            const std::string kind = r.at("kind").get<std::string>();
            const std::string name = r.value("name", kind + std::to_string(k));
            if (!names.insert(name).second) throw ValidationError("duplicate resource name '" + name + "'");
            const std::string bus = r.at("bus").is_string() ? r.at("bus").get<std::string>()
                                                              : std::to_string(r.at("bus").get<long long>());
            if (kind == "bess") {
                BessSpec s;
                s.name = name;
                s.bus = bus;
                s.p_min = num(r, "p_min_kw");
                s.p_max = num(r, "p_max_kw");
                s.q_min = num(r, "q_min_kvar", 0.0);
                s.q_max = num(r, "q_max_kvar", 0.0);
                s.soe_min = num(r, "soe_min_kwh");
                s.soe_max = num(r, "soe_max_kwh");
                s.soe_0 = num(r, "soe_0_kwh", 0.5 * (s.soe_min + s.soe_max));
                s.c_inv = num(r, "c_inv", 0.0);
                s.n_cycles = num(r, "n_cycles", 1.0);
                s.dt = dt;
                s.validate();
                fleet.ders.emplace_back(s);
            } else if (kind == "hp") {
                HpSpec s;
                s.name = name;
                s.bus = bus;
                s.p_min = num(r, "p_min_kw", 0.0);
                s.p_max = num(r, "p_max_kw");
                s.m_bt = num(r, "m_bt_kg");
                s.l_bt = num(r, "l_bt_kw", 0.0);
                s.a_hp = num(r, "a_hp");
                s.q0_hp = num(r, "q0_hp_kw", 0.0);
                s.h_demand = num(r, "h_demand_kw_per_k", 0.0);
                s.t_comfort = num(r, "t_comfort_k");
                s.t_min = num(r, "t_min_k");
                s.t_max = num(r, "t_max_k");
                s.t_0 = num(r, "t_0_k", 0.5 * (s.t_min + s.t_max));
                s.t_env = series(r, "t_env_k", horizon);
                s.h_map = driver_map(r, "t_env_uncertainty", layout);
                s.dt = dt;
                s.validate(horizon);
                fleet.ders.emplace_back(s);
            } else if (kind == "pv") {
                PvSpec s;
                s.name = name;
                s.bus = bus;
                s.mpp = series(r, "mpp_kw", horizon);
                s.m_pv = driver_map(r, "mpp_uncertainty", layout, s.mpp);
                s.curtailable = r.value("curtailable", true);
                s.validate(horizon);
                fleet.ders.emplace_back(s);
            } else {
                throw ValidationError("unknown resource kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw ParseError(path, "record " + std::to_string(k) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": record " + std::to_string(k) + ": " + e.what());
        }
    }
    return fleet;
}

}  // namespace flexcap
