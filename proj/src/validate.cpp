#include "flexcap/validate.hpp"

#include "flexcap/resources.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

namespace flexcap {

namespace {

using nlohmann::json;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 scenario_rng(std::uint64_t seed, int k) {
    return std::mt19937_64(splitmix(seed ^ splitmix(static_cast<std::uint64_t>(k) + 1)));
}

struct Offer {
    ServiceKind kind;
    const Vec* e;
};

std::vector<Vec> pick(const std::vector<Offer>& offers, int horizon, Strategy s, std::mt19937_64& rng) {
    std::vector<Vec> xi;
    const int t_star = horizon > 0 ? std::uniform_int_distribution<int>(0, horizon - 1)(rng) : 0;
    for (const auto& o : offers) {
        Vec v = Vec::Zero(horizon);
        switch (s) {
            case Strategy::Zero: break;
            case Strategy::MaxFlex: {
                const double n = o.e->norm();
                if (n > 0.0) v = *o.e / n;
                if (o.kind == ServiceKind::Down) v = -v;
                break;
            }
            case Strategy::Random: {
                v = unit_ball_point(rng, horizon);
                if (o.kind == ServiceKind::Up) v = v.cwiseAbs();
                if (o.kind == ServiceKind::Down) v = -v.cwiseAbs();
                break;
            }
            case Strategy::PerTimeExtreme: {
                double sign = 1.0;
                if (o.kind == ServiceKind::Down) sign = -1.0;
                if (o.kind == ServiceKind::Symmetric) sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
                v(t_star) = sign;
                break;
            }
        }
        xi.push_back(std::move(v));
    }
    return xi;
}

double limit_scale(double limit) { return std::max(1.0, std::abs(limit)); }

// Records value - limit (resource units) as a violation when beyond tolerance.
void resource_check(ScenarioOutcome& o, Category c, double excess, double limit, double tol) {
    const double scaled = excess / limit_scale(limit);
    auto& w = o.worst[static_cast<int>(c)];
    w = std::max(w, scaled);
    if (scaled > tol) o.violated[static_cast<int>(c)] = true;
}

void network_check(ScenarioOutcome& o, Category c, double rel_excess, const ValidateOptions& opt) {
    auto& w = o.worst[static_cast<int>(c)];
    w = std::max(w, rel_excess);
    if (rel_excess > opt.rel_tol + opt.allowance) o.violated[static_cast<int>(c)] = true;
}

ScenarioOutcome evaluate(const AggregationResult& r, const FeederModel& feeder, const LinearGridModel& grid,
                         const CMat& ybus, const Activation& a, const Vec& zeta, const ValidateOptions& opt) {
    const int horizon = r.horizon;
    const NetworkDescription& net = feeder.net;
    if (feeder.horizon() != horizon || feeder.fleet.size() != r.num_ders) {
        throw ValidationError("feeder '" + feeder.name + "' does not match the aggregation result");
    }
    ScenarioOutcome o;
    o.worst.fill(-HUGE_VAL);
    const Disaggregation d = disaggregate(r, a, zeta);
    const Vec energy = d.energy_weighted();
    const double base = r.base_kva;
    auto kw = [&](const Vec& u, int der, bool reactive) {
        Vec out(horizon);
        for (int t = 0; t < horizon; ++t) out(t) = u(t * 2 * r.num_ders + (reactive ? r.num_ders : 0) + der) * base;
        return out;
    };
    const double tol = opt.resource_tol;
    for (int k = 0; k < r.num_ders; ++k) {
        const DerSpec& spec = feeder.fleet.ders[static_cast<std::size_t>(k)];
        const Vec p = kw(d.total, k, false);
        const Vec q = kw(d.total, k, true);
        if (const auto* b = std::get_if<BessSpec>(&spec)) {
            for (int t = 0; t < horizon; ++t) {
                resource_check(o, Category::Power, p(t) - b->p_max, b->p_max, tol);
                resource_check(o, Category::Power, b->p_min - p(t), b->p_min, tol);
                resource_check(o, Category::Power, q(t) - b->q_max, b->q_max, tol);
                resource_check(o, Category::Power, b->q_min - q(t), b->q_min, tol);
            }
            const Vec soe = simulate_soe(*b, kw(energy, k, false));
            for (int t = 1; t <= horizon; ++t) {
                resource_check(o, Category::Soe, soe(t) - b->soe_max, b->soe_max, tol);
                resource_check(o, Category::Soe, b->soe_min - soe(t), b->soe_min, tol);
            }
            if (opt.trajectories) o.soe.push_back(soe);
        } else if (const auto* h = std::get_if<HpSpec>(&spec)) {
            for (int t = 0; t < horizon; ++t) {
                resource_check(o, Category::Power, -p(t) - h->p_max, h->p_max, tol);
                resource_check(o, Category::Power, h->p_min + p(t), h->p_min, tol);
                resource_check(o, Category::Power, std::abs(q(t)), 0.0, tol);
            }
            const Vec temp = simulate_tank(*h, kw(energy, k, false), zeta);
            for (int t = 1; t <= horizon; ++t) {
                resource_check(o, Category::Temperature, temp(t) - h->t_max, h->t_max, tol);
                resource_check(o, Category::Temperature, h->t_min - temp(t), h->t_min, tol);
            }
            if (opt.trajectories) o.tank.push_back(temp);
        } else if (const auto* pv = std::get_if<PvSpec>(&spec)) {
            const double rating = pv->mpp.size() ? pv->mpp.maxCoeff() : 0.0;
            for (int t = 0; t < horizon; ++t) {
                double avail = pv->mpp(t);
                if (pv->m_pv.size() > 0 && zeta.size() > 0) avail += pv->m_pv.row(t).dot(zeta);
                resource_check(o, Category::PvCap, p(t), rating, tol);
                if (pv->curtailable) {
                    resource_check(o, Category::PvCap, -(avail + p(t)), rating, tol);
                } else {
                    resource_check(o, Category::PvCap, -p(t), rating, tol);
                }
                resource_check(o, Category::PvCap, std::abs(q(t)), rating, tol);
            }
        }
    }

    const CMat inj = feeder.injections(d.total, zeta);
    o.gcp_kw = Vec::Zero(horizon);
    for (int t = 0; t < horizon; ++t) {
        PowerFlowSolution pf;
        try {
            pf = solve_power_flow(net, ybus, inj.col(t), grid.v_slack, CVec::Constant(net.num_buses(), grid.v_slack),
                                  opt.pf);
        } catch (const SolverError&) {
            o.violated[static_cast<int>(Category::PfDivergence)] = true;
            o.worst[static_cast<int>(Category::PfDivergence)] = 1.0;
            continue;
        }
        o.gcp_kw(t) = pf.export_power() * base;
        const Vec v = pf.v_mag();
        for (int b = 0; b < net.num_buses(); ++b) {
            if (b == net.slack()) continue;
            const Bus& bus = net.buses[static_cast<std::size_t>(b)];
            network_check(o, Category::Voltage, v(b) / bus.v_max - 1.0, opt);
            network_check(o, Category::Voltage, 1.0 - v(b) / bus.v_min, opt);
        }
        const Vec i = pf.i_mag();
        const bool linear = !grid.steps.empty();
        Vec i_lin;
        if (linear) {
            const LinearGridStep& st = grid.steps[static_cast<std::size_t>(t)];
            Vec dx(2 * net.num_buses());
            dx << (inj.col(t) - st.operating_point).real(), (inj.col(t) - st.operating_point).imag();
            i_lin = st.i + st.ki * dx;
        }
        for (int l = 0; l < net.num_branches(); ++l) {
            const double rating = net.branches[static_cast<std::size_t>(l)].i_max;
            if (!(rating > 0.0) || !std::isfinite(rating)) continue;
            network_check(o, Category::Current, i(l) / rating - 1.0, opt);
            if (linear) o.current_delta = std::max(o.current_delta, std::abs(i(l) - std::abs(i_lin(l))) / rating);
        }
    }
    return o;
}

// Without a converged nominal point the linear-current comparison is skipped.
LinearGridModel nominal_grid(const FeederModel& feeder, Exec exec) {
    LinearizeOptions lo;
    lo.exec = exec;
    try {
        return linearize(feeder.net, feeder.nominal_injections(), 1.0, lo);
    } catch (const SolverError& e) {
        spdlog::warn("feeder '{}': nominal linearization failed ({}); linear current deltas not reported", feeder.name,
                     e.what());
        LinearGridModel g;
        g.v_slack = 1.0;
        return g;
    }
}

void merge(ScenarioOutcome& into, ScenarioOutcome&& from) {
    for (int c = 0; c < kNumCategories; ++c) {
        into.violated[c] = into.violated[c] || from.violated[c];
        into.worst[c] = std::max(into.worst[c], from.worst[c]);
    }
    into.current_delta = std::max(into.current_delta, from.current_delta);
    for (auto& s : from.soe) into.soe.push_back(std::move(s));
    for (auto& s : from.tank) into.tank.push_back(std::move(s));
    into.gcp_kw = into.gcp_kw.size() ? Vec(into.gcp_kw + from.gcp_kw) : from.gcp_kw;
}

template <class Body>
std::vector<ScenarioOutcome> run_scenarios(int n, Exec exec, Body body) {
    std::vector<ScenarioOutcome> out(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    auto one = [&](int k) {
        try {
            out[static_cast<std::size_t>(k)] = body(k);
            out[static_cast<std::size_t>(k)].index = k;
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (int k = 0; k < n; ++k) one(k);
    } else {
        for (int k = 0; k < n; ++k) one(k);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

ViolationReport reduce(std::vector<ScenarioOutcome> outcomes, const ValidateOptions& opt) {
    ViolationReport rep;
    rep.seed = opt.seed;
    rep.strategy = to_string(opt.strategy);
    rep.scenarios = static_cast<int>(outcomes.size());
    rep.worst.fill(-HUGE_VAL);
    for (const auto& o : outcomes) {
        if (!o.in_set) ++rep.outside;
        if (o.any()) ++rep.violations;
        bool network = false;
        for (int c = 0; c < kNumCategories; ++c) {
            if (o.violated[c]) {
                ++rep.category_count[c];
                if (!is_resource(static_cast<Category>(c))) network = true;
            }
            rep.worst[c] = std::max(rep.worst[c], o.worst[c]);
        }
        if (o.in_set && (o.resource_violation() || network)) ++rep.in_set_breaches;
        rep.max_current_delta = std::max(rep.max_current_delta, o.current_delta);
    }
    rep.outcomes = std::move(outcomes);
    return rep;
}

std::vector<std::string> names_of(const DerFleet& fleet, bool batteries) {
    std::vector<std::string> out;
    for (const auto& d : fleet.ders) {
        if (batteries ? std::holds_alternative<BessSpec>(d) : std::holds_alternative<HpSpec>(d)) out.push_back(der_name(d));
    }
    return out;
}

bool set_contains(const UncertaintySet& u, const Vec& zeta) { return u.dim() == 0 || u.contains(zeta); }
double set_gauge(const UncertaintySet& u, const Vec& zeta) { return u.dim() == 0 ? 0.0 : u.gauge(zeta); }

}  // namespace

std::string to_string(Category c) {
    switch (c) {
        case Category::Voltage: return "voltage";
        case Category::Current: return "current";
        case Category::Power: return "power";
        case Category::Soe: return "soe";
        case Category::Temperature: return "temperature";
        case Category::PvCap: return "pv-cap";
        case Category::PfDivergence: return "pf-divergence";
    }
    return "unknown";
}

bool is_resource(Category c) {
    return c == Category::Power || c == Category::Soe || c == Category::Temperature || c == Category::PvCap;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Zero: return "zero";
        case Strategy::MaxFlex: return "max-flex";
        case Strategy::Random: return "random";
        case Strategy::PerTimeExtreme: return "per-time-extreme";
    }
    return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
    for (Strategy k : {Strategy::Zero, Strategy::MaxFlex, Strategy::Random, Strategy::PerTimeExtreme}) {
        if (to_string(k) == s) return k;
    }
    throw ValidationError("unknown activation strategy '" + s + "'");
}

bool ScenarioOutcome::any() const {
    return std::any_of(violated.begin(), violated.end(), [](bool b) { return b; });
}

bool ScenarioOutcome::resource_violation() const {
    for (int c = 0; c < kNumCategories; ++c) {
        if (violated[c] && is_resource(static_cast<Category>(c))) return true;
    }
    return false;
}

Vec unit_ball_point(std::mt19937_64& rng, int dim, bool boundary) {
    Vec v(dim);
    if (dim == 0) return v;
    std::normal_distribution<double> nd;
    do {
        for (int i = 0; i < dim; ++i) v(i) = nd(rng);
    } while (v.norm() == 0.0);
    v /= v.norm();
    if (!boundary) v *= std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / dim);
    return v;
}

Vec sample_in_set(const UncertaintySet& set, std::mt19937_64& rng) {
    if (set.dim() == 0) return Vec();
    if (set.kind == SetKind::Ellipsoid) return set.center + set.shape * unit_ball_point(rng, set.dim());
    Vec v(set.dim());
    for (int i = 0; i < set.dim(); ++i) v(i) = std::uniform_real_distribution<double>(set.lower(i), set.upper(i))(rng);
    return v;
}

Activation select_activation(const AggregationResult& r, Strategy s, std::mt19937_64& rng) {
    std::vector<Offer> offers;
    for (const auto& sr : r.services) offers.push_back({sr.kind, &sr.e_kw});
    Activation a;
    a.xi = pick(offers, r.horizon, s, rng);
    if (r.baseload == BaseloadKind::SelfDispatch) {
        a.xi0 = s == Strategy::Random ? unit_ball_point(rng, r.horizon) : Vec(Vec::Zero(r.horizon));
    }
    return a;
}

ScenarioOutcome evaluate_scenario(const AggregationResult& r, const FeederModel& feeder, const LinearGridModel& grid,
                                  const Activation& a, const Vec& zeta, const ValidateOptions& opt) {
    return evaluate(r, feeder, grid, admittance_matrix(feeder.net), a, zeta, opt);
}

ViolationReport monte_carlo_validate(const AggregationResult& r, const FeederModel& feeder, const UncertaintySet& uset,
                                     const Mat& zeta_rows, const ValidateOptions& opt) {
    if (zeta_rows.rows() > 0 && zeta_rows.cols() != feeder.layout.dim()) {
        throw ValidationError("scenario rows do not match the uncertainty layout");
    }
    const LinearGridModel grid = nominal_grid(feeder, opt.exec);
    const CMat ybus = admittance_matrix(feeder.net);
    auto outcomes = run_scenarios(static_cast<int>(zeta_rows.rows()), opt.exec, [&](int k) {
        std::mt19937_64 rng = scenario_rng(opt.seed, k);
        const Vec zeta = zeta_rows.row(k).transpose();
        const Activation a = select_activation(r, opt.strategy, rng);
        ScenarioOutcome o = evaluate(r, feeder, grid, ybus, a, zeta, opt);
        o.in_set = set_contains(uset, zeta);
        o.gauge = set_gauge(uset, zeta);
        return o;
    });
    ViolationReport rep = reduce(std::move(outcomes), opt);
    rep.battery_names = names_of(feeder.fleet, true);
    rep.heat_pump_names = names_of(feeder.fleet, false);
    spdlog::info("validation: {} scenarios, {} outside the set, violation rate {:.2f}%", rep.scenarios, rep.outside,
                 100.0 * rep.violation_rate());
    return rep;
}

ContainmentReport check_containment(const CombinedResult& c, const std::vector<UncertaintySet>& usets, int samples,
                                    std::uint64_t seed) {
    if (usets.size() != c.feeders.size()) throw ValidationError("one uncertainty set per combined feeder is required");
    std::vector<Offer> offers;
    for (const auto& s : c.services) offers.push_back({s.kind, &s.e_kw});
    const Strategy cycle[] = {Strategy::Random, Strategy::MaxFlex, Strategy::PerTimeExtreme};
    ContainmentReport rep;
    rep.samples = samples;
    for (int k = 0; k < samples; ++k) {
        std::mt19937_64 rng = scenario_rng(seed, k);
        Activation a;
        a.xi = pick(offers, c.horizon, cycle[k % 3], rng);
        std::vector<Vec> zeta;
        for (const auto& u : usets) zeta.push_back(sample_in_set(u, rng));
        for (const auto& fa : c.feeder_activations(a)) {
            for (const auto& xi : fa.xi) rep.max_feeder_norm = std::max(rep.max_feeder_norm, xi.norm());
        }
        if (rep.max_feeder_norm > 1.0 + 1e-8) continue;
        const ChainDisaggregation chain = disaggregate_chain(c, a, zeta);
        rep.max_export_excess = std::max(rep.max_export_excess, chain.transformer_kw.maxCoeff() - c.transfo_export_max);
        rep.max_import_excess =
            std::max(rep.max_import_excess, -chain.transformer_kw.minCoeff() - c.transfo_import_max);
    }
    return rep;
}

nlohmann::json to_json(const ContainmentReport& r) {
    return {{"samples", r.samples},
            {"max_feeder_norm", r.max_feeder_norm},
            {"max_export_excess_kw", r.max_export_excess},
            {"max_import_excess_kw", r.max_import_excess},
            {"ok", r.ok()}};
}

ViolationReport monte_carlo_validate_chain(const CombinedResult& c, const std::vector<FeederModel>& feeders,
                                           const std::vector<UncertaintySet>& usets, const Mat& zeta_rows,
                                           const ValidateOptions& opt) {
    if (feeders.size() != c.feeders.size() || usets.size() != c.feeders.size()) {
        throw ValidationError("one feeder model and uncertainty set per combined feeder is required");
    }
    std::vector<LinearGridModel> grids;
    std::vector<CMat> ybus;
    for (const auto& f : feeders) {
        if (zeta_rows.rows() > 0 && zeta_rows.cols() != f.layout.dim()) {
            throw ValidationError("scenario rows do not match the layout of feeder '" + f.name + "'");
        }
        grids.push_back(nominal_grid(f, opt.exec));
        ybus.push_back(admittance_matrix(f.net));
    }
    std::vector<Offer> offers;
    for (const auto& s : c.services) offers.push_back({s.kind, &s.e_kw});
    auto outcomes = run_scenarios(static_cast<int>(zeta_rows.rows()), opt.exec, [&](int k) {
        std::mt19937_64 rng = scenario_rng(opt.seed, k);
        const Vec zeta = zeta_rows.row(k).transpose();
        Activation a;
        a.xi = pick(offers, c.horizon, opt.strategy, rng);
        const auto fa = c.feeder_activations(a);
        ScenarioOutcome o;
        o.worst.fill(-HUGE_VAL);
        for (std::size_t f = 0; f < feeders.size(); ++f) {
            for (const auto& xi : fa[f].xi) {
                if (xi.norm() > 1.0 + 1e-8) throw InvariantError("feeder activation leaves its ellipsoid");
            }
            merge(o, evaluate(c.feeders[f], feeders[f], grids[f], ybus[f], fa[f], zeta, opt));
            o.in_set = o.in_set && set_contains(usets[f], zeta);
            o.gauge = std::max(o.gauge, set_gauge(usets[f], zeta));
        }
        return o;
    });
    ViolationReport rep = reduce(std::move(outcomes), opt);
    for (const auto& f : feeders) {
        for (auto& n : names_of(f.fleet, true)) rep.battery_names.push_back(f.name + "/" + n);
        for (auto& n : names_of(f.fleet, false)) rep.heat_pump_names.push_back(f.name + "/" + n);
    }
    return rep;
}

json to_json(const ViolationReport& r, bool per_scenario) {
    json j;
    j["schema"] = "flexcap.validation.v1";
    j["seed"] = r.seed;
    j["strategy"] = r.strategy;
    j["scenarios"] = r.scenarios;
    j["outside_set"] = {{"count", r.outside}, {"percent", 100.0 * r.outside_rate()}};
    j["violations"] = {{"count", r.violations}, {"percent", 100.0 * r.violation_rate()}};
    j["in_set_breaches"] = r.in_set_breaches;
    j["max_current_delta"] = r.max_current_delta;
    json cats = json::object();
    for (int c = 0; c < kNumCategories; ++c) {
        const double w = r.worst[c];
        cats[to_string(static_cast<Category>(c))] = {{"count", r.category_count[c]},
                                                     {"worst", std::isfinite(w) ? json(w) : json(nullptr)}};
    }
    j["categories"] = cats;
    if (per_scenario) {
        json rows = json::array();
        for (const auto& o : r.outcomes) {
            json row = {{"index", o.index}, {"in_set", o.in_set}, {"gauge", o.gauge}, {"violated", o.any()}};
            json soe = json::array();
            for (const auto& s : o.soe) soe.push_back(std::vector<double>(s.data(), s.data() + s.size()));
            json tank = json::array();
            for (const auto& s : o.tank) tank.push_back(std::vector<double>(s.data(), s.data() + s.size()));
            row["soe_kwh"] = soe;
            row["tank_k"] = tank;
            row["gcp_kw"] = std::vector<double>(o.gcp_kw.data(), o.gcp_kw.data() + o.gcp_kw.size());
            rows.push_back(row);
        }
        j["outcomes"] = rows;
        j["batteries"] = r.battery_names;
        j["heat_pumps"] = r.heat_pump_names;
    }
    return j;
}

std::string to_csv(const ViolationReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "index,in_set,gauge,violated";
    for (int c = 0; c < kNumCategories; ++c) os << ',' << to_string(static_cast<Category>(c));
    os << '\n';
    for (const auto& o : r.outcomes) {
        os << o.index << ',' << (o.in_set ? 1 : 0) << ',' << o.gauge << ',' << (o.any() ? 1 : 0);
        for (int c = 0; c < kNumCategories; ++c) os << ',' << (o.violated[c] ? 1 : 0);
        os << '\n';
    }
    return os.str();
}

UncertaintySet fit_set(const std::string& kind, const Mat& rows, double epsilon, Exec exec) {
    if (kind == "hyperbox") return hyperbox(rows, epsilon);
    if (kind == "coverage") return coverage_ellipsoid(rows, epsilon, exec);
    if (kind == "mvee") return min_volume_ellipsoid(rows);
    if (kind == "gaussian") return fit_gaussian_ellipsoid(rows, epsilon);
    throw ValidationError("unknown uncertainty set kind '" + kind + "'");
}

std::vector<ComparisonRow> compare_uncertainty_sets(const FeederModel& feeder, const ScenarioSet& scenarios,
                                                    const std::vector<CompareCase>& cases,
                                                    const std::vector<ServiceSpec>& services,
                                                    const BaseloadMode& baseload, const InputOptions& input,
                                                    const ValidateOptions& opt) {
    const Mat in_rows = scenarios.zeta(true);
    const Mat out_rows = scenarios.zeta(false);
    std::vector<ComparisonRow> rows;
    for (const auto& cs : cases) {
        ComparisonRow row;
        row.kind = cs.kind;
        row.epsilon = cs.epsilon;
        try {
            const UncertaintySet u = fit_set(cs.kind, in_rows, cs.epsilon, opt.exec);
            row.achieved_coverage = u.achieved_coverage;
            const AggregationResult r = aggregate(make_input(feeder, u, services, baseload, input));
            row.objective = r.objective;
            const ViolationReport rep = monte_carlo_validate(r, feeder, u, out_rows, opt);
            row.violation_rate = rep.violation_rate();
            row.outside_rate = rep.outside_rate();
        } catch (const InvariantError&) {
            throw;
        } catch (const Error& e) {
            row.error = e.what();
            spdlog::warn("comparison row '{}' failed: {}", cs.kind, e.what());
        }
        rows.push_back(row);
    }
    return rows;
}

std::string to_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "kind,epsilon,achieved_coverage,objective,violation_rate,outside_rate,error\n";
    for (const auto& r : rows) {
        os << r.kind << ',' << r.epsilon << ',' << r.achieved_coverage << ',' << r.objective << ',' << r.violation_rate
           << ',' << r.outside_rate << ',' << '"' << r.error << '"' << '\n';
    }
    return os.str();
}

}  // namespace flexcap
