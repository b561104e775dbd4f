#include "flexcap/config.hpp"

#include "csv.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace flexcap {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path, e.what());
    }
}

std::string resolve(const std::string& base_file, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base_file).parent_path() / p).lexically_normal().string();
}

void require_file(const std::string& what, const std::string& p) {
    if (p.empty()) throw ValidationError(what + " path is missing");
    if (!fs::is_regular_file(p)) throw ValidationError(what + " file not found: " + p);
}

conic::Tolerances tolerances_from(const json& j, conic::Tolerances t) {
    t.feasibility = j.value("feasibility", t.feasibility);
    t.gap = j.value("gap", t.gap);
    t.accept = j.value("accept", t.accept);
    t.max_iterations = j.value("max_iterations", t.max_iterations);
    return t;
}

void check_tolerances(const conic::Tolerances& t) {
    if (!(t.feasibility > 0.0 && t.gap > 0.0 && t.accept > 0.0)) throw ValidationError("tolerances must be positive");
    if (t.max_iterations <= 0) throw ValidationError("max_iterations must be positive");
}

bool known_kind(const std::string& k) {
    return k == "hyperbox" || k == "coverage" || k == "mvee" || k == "gaussian";
}

Vec number_or_series(const json& j, int horizon) {
    if (j.is_number()) return Vec::Constant(horizon, j.get<double>());
    const auto v = j.get<std::vector<double>>();
    return resample(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())), horizon);
}

}  // namespace

Vec PriceTable::on_horizon(const std::string& service, int horizon, double dt, bool per_step) const {
    const auto it = series.find(service);
    if (it == series.end()) throw ValidationError("no prices for service '" + service + "'");
    const double span = static_cast<double>(it->second.size()) * dt_hours;
    if (std::abs(span - horizon * dt) > 1e-9 * std::max(1.0, span)) {
        throw ValidationError("prices for '" + service + "' cover " + std::to_string(span) + " h, the horizon " +
                              std::to_string(horizon * dt) + " h");
    }
    Vec v = resample(it->second, horizon);
    if (per_step) v *= dt / dt_hours;
    return v;
}

PriceTable load_prices(const std::string& path) {
    PriceTable p;
    {
        std::ifstream in(path);
        if (!in) throw ParseError(path, "cannot open file");
        std::string line;
        bool found = false;
        while (std::getline(in, line)) {
            const std::string s = csv::trim(line);
            if (s.empty()) continue;
            if (s[0] != '#') break;
            const auto at = s.find("dt_hours=");
            if (at != std::string::npos) {
                try {
                    p.dt_hours = std::stod(s.substr(at + 9));
                } catch (const std::exception&) {
                    throw ParseError(path, 1, "unreadable dt_hours");
                }
                found = true;
            }
        }
        if (!found) throw ParseError(path, 1, "missing '# dt_hours=<h>' header line");
        if (!(p.dt_hours > 0.0)) throw ParseError(path, 1, "dt_hours must be positive");
    }
    const csv::Table t = csv::read(path);
    const int c_t = t.require_column("t");
    const int c_s = t.require_column("service");
    const int c_p = t.require_column("price");
    std::map<std::string, std::map<int, double>> raw;
    for (const csv::Row& r : t.rows) {
        const double tv = csv::to_double(t, r, c_t);
        const int step = static_cast<int>(std::lround(tv));
        if (step < 0 || std::abs(tv - step) > 0) throw ParseError(path, r.line, "t must be a nonnegative integer");
        const double price = csv::to_double(t, r, c_p);
        if (!std::isfinite(price)) throw ParseError(path, r.line, "price must be finite");
        if (!raw[r.cells[c_s]].emplace(step, price).second) {
            throw ParseError(path, r.line, "duplicate price for '" + r.cells[c_s] + "' at t=" + std::to_string(step));
        }
    }
    for (const auto& [name, steps] : raw) {
        const int n = static_cast<int>(steps.size());
        if (steps.rbegin()->first != n - 1) throw ParseError(path, "prices for '" + name + "' have gaps");
        Vec v(n);
        for (const auto& [step, price] : steps) v(step) = price;
        p.series[name] = v;
    }
    return p;
}

void RunConfig::validate() const {
    if (horizon <= 0) throw ValidationError("horizon must be positive");
    if (!(dt_hours > 0.0)) throw ValidationError("dt_hours must be positive");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in [0, 1)");
    if (!known_kind(uncertainty_kind)) throw ValidationError("unknown uncertainty kind '" + uncertainty_kind + "'");
    if (!(delta >= 0.0 && delta < 0.5)) throw ValidationError("delta must lie in [0, 0.5)");
    check_tolerances(tolerances);
    require_file("network", network);
    require_file("fleet", fleet);
    if (!prosumers.empty()) require_file("prosumers", prosumers);
    require_file("scenarios", scenarios);
    if (!services.empty() || baseload.kind == BaseloadKind::Controlled) require_file("prices", prices);
    if (!frequency.empty()) require_file("frequency", frequency);
    if (!uncertainty_file.empty()) require_file("uncertainty", uncertainty_file);
    std::set<std::string> names;
    for (const auto& s : services) {
        if (s.name.empty()) throw ValidationError("service without a name");
        if (!names.insert(s.name).second) throw ValidationError("duplicate service '" + s.name + "'");
        if (s.block_steps <= 0 || horizon % s.block_steps != 0) {
            throw ValidationError("service '" + s.name + "': block length must divide the horizon");
        }
        if (!(s.price_scale >= 0.0)) throw ValidationError("service '" + s.name + "': price scale must be nonnegative");
        if (!(s.energy_factor >= 0.0 && s.throughput_factor >= 0.0)) {
            throw ValidationError("service '" + s.name + "': energy and throughput factors must be nonnegative");
        }
    }
    if (baseload.kind == BaseloadKind::SelfDispatch && baseload.e0_kw.size() != horizon) {
        throw ValidationError("self-dispatch baseload needs e0_kw over the horizon");
    }
    if (!(fcr_block_hours > 0.0)) throw ValidationError("fcr block length must be positive");
    if (validation_scenarios != "out" && validation_scenarios != "in" && validation_scenarios != "in-set") {
        throw ValidationError("validation scenarios must be out, in or in-set");
    }
    if (validation_samples <= 0) throw ValidationError("validation samples must be positive");
    if (!(validation.allowance >= 0.0 && validation.rel_tol >= 0.0)) {
        throw ValidationError("validation tolerances must be nonnegative");
    }
}

RunConfig load_run_config(const std::string& path) {
    const json j = read_json(path);
    RunConfig c;
    c.path = path;
    try {
        if (j.value("schema", std::string()) != "flexcap.config.v1") {
            throw ParseError(path, "schema must be 'flexcap.config.v1'");
        }
        c.name = j.value("name", fs::path(path).stem().string());
        c.network = resolve(path, j.at("network").get<std::string>());
        c.fleet = resolve(path, j.at("fleet").get<std::string>());
        c.prosumers = resolve(path, j.value("prosumers", std::string()));
        c.scenarios = resolve(path, j.at("scenarios").get<std::string>());
        c.prices = resolve(path, j.value("prices", std::string()));
        c.frequency = resolve(path, j.value("frequency", std::string()));
        c.horizon = j.at("horizon").get<int>();
        c.dt_hours = j.value("dt_hours", 24.0 / std::max(1, c.horizon));
        c.drivers = j.value("drivers", std::vector<std::string>{});
        c.in_sample = j.value("in_sample", -1);
        for (const json& s : j.value("services", json::array())) {
            ServiceConfig sc;
            sc.name = s.at("name").get<std::string>();
            sc.kind = service_kind_from_string(s.at("kind").get<std::string>());
            sc.block_steps = s.value("block_steps", 1);
            sc.eligible = s.value("eligible", std::vector<std::string>{});
            sc.fcr = s.value("fcr", false);
            sc.price_scale = s.value("price_scale", 1.0);
            sc.energy_factor = s.value("energy_factor", 1.0);
            sc.throughput_factor = s.value("throughput_factor", 1.0);
            sc.battery_cost = s.value("battery_cost", true);
            c.services.push_back(sc);
        }
        if (j.contains("baseload")) {
            const json& b = j.at("baseload");
            c.baseload.kind = baseload_kind_from_string(b.value("mode", std::string("uncontrolled")));
            if (b.contains("energy_price")) {
                if (b.at("energy_price").is_string()) {
                    c.baseload.energy_price = b.at("energy_price").get<std::string>();
                } else {
                    c.baseload.energy_price_value = b.at("energy_price").get<double>();
                }
            }
            if (b.contains("e0_kw")) c.baseload.e0_kw = number_or_series(b.at("e0_kw"), c.horizon);
            c.baseload.e0_width_kw = b.value("e0_width_kw", 0.0);
        }
        if (j.contains("uncertainty")) {
            const json& u = j.at("uncertainty");
            c.uncertainty_kind = u.value("kind", c.uncertainty_kind);
            c.epsilon = u.value("epsilon", c.epsilon);
            c.uncertainty_file = resolve(path, u.value("file", std::string()));
        }
        c.network_rows = j.value("network_rows", true);
        c.delta = j.value("delta", 0.0);
        if (j.contains("tolerances")) c.tolerances = tolerances_from(j.at("tolerances"), c.tolerances);
        if (j.contains("validation")) {
            const json& v = j.at("validation");
            c.validation.strategy = strategy_from_string(v.value("strategy", std::string("max-flex")));
            c.validation.allowance = v.value("allowance", c.validation.allowance);
            c.validation.rel_tol = v.value("rel_tol", c.validation.rel_tol);
            c.validation_scenarios = v.value("scenarios", c.validation_scenarios);
            c.validation_samples = v.value("samples", c.validation_samples);
        }
        if (j.contains("fcr")) {
            const json& f = j.at("fcr");
            c.fcr_rho = f.value("rho", c.fcr_rho);
            c.fcr_throughput = f.value("throughput", c.fcr_throughput);
            c.fcr_block_hours = f.value("block_hours", c.fcr_block_hours);
        }
        c.seed = j.value("seed", std::uint64_t{1});
        c.output = resolve(path, j.value("output", std::string("out")));
    } catch (const json::exception& e) {
        throw ParseError(path, e.what());
    }
    c.validation.seed = c.seed;
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return c;
}

RunInputs load_run_inputs(const RunConfig& cfg) {
    RunInputs r;
    r.scenarios = load_scenarios(cfg.scenarios);
    if (r.scenarios.layout.horizon != cfg.horizon) {
        throw ValidationError(cfg.scenarios + ": scenario columns cover " + std::to_string(r.scenarios.layout.horizon) +
                              " steps, the horizon is " + std::to_string(cfg.horizon));
    }
    if (!cfg.drivers.empty() && cfg.drivers != r.scenarios.layout.drivers) {
        throw ValidationError(cfg.scenarios + ": drivers differ from the configured list");
    }
    if (cfg.in_sample >= 0) {
        if (cfg.in_sample > r.scenarios.size()) throw ValidationError("in_sample exceeds the scenario count");
        r.scenarios.split_first(cfg.in_sample);
    }

    FeederModel& f = r.feeder;
    f.name = cfg.name;
    f.net = load_network(cfg.network);
    f.dt = cfg.dt_hours;
    f.layout = r.scenarios.layout;
    f.fleet = load_fleet(cfg.fleet, f.layout, f.dt);
    if (!cfg.prosumers.empty()) f.prosumers = load_prosumers(cfg.prosumers, f.layout);
    f.validate();

    double rho = cfg.fcr_rho;
    double throughput = cfg.fcr_throughput;
    if (!cfg.frequency.empty()) {
        r.fcr = fcr_energy_requirements(load_frequency_series(cfg.frequency), cfg.fcr_block_hours);
        rho = r.fcr.bias_p95;
        throughput = r.fcr.throughput_p95;
        spdlog::info("fcr statistics: bias p95 {:.4f}, throughput p95 {:.4f}", rho, throughput);
    }

    PriceTable prices;
    if (!cfg.prices.empty()) prices = load_prices(cfg.prices);
    const int n = f.fleet.size();
    for (const ServiceConfig& sc : cfg.services) {
        ServiceSpec s;
        s.name = sc.name;
        s.kind = sc.kind;
        s.block_length = sc.block_steps;
        s.price = sc.price_scale * prices.on_horizon(sc.name, cfg.horizon, cfg.dt_hours, true);
        s.energy_factor = sc.fcr ? rho : sc.energy_factor;
        const double tf = sc.fcr ? throughput : sc.throughput_factor;
        if (!sc.eligible.empty()) {
            s.eligible.assign(static_cast<std::size_t>(n), false);
            for (const auto& name : sc.eligible) {
                int hit = -1;
                for (int k = 0; k < n; ++k) {
                    if (der_name(f.fleet.ders[static_cast<std::size_t>(k)]) == name) hit = k;
                }
                if (hit < 0) throw ValidationError("service '" + sc.name + "': unknown resource '" + name + "'");
                s.eligible[static_cast<std::size_t>(hit)] = true;
            }
        }
        if (sc.battery_cost) {
            s.cost = Mat::Zero(n, cfg.horizon);
            for (int k = 0; k < n; ++k) {
                if (const auto* b = std::get_if<BessSpec>(&f.fleet.ders[static_cast<std::size_t>(k)])) {
                    s.cost.row(k).setConstant(bess_capacity_cost(*b, tf));
                }
            }
        }
        s.validate(cfg.horizon, n);
        r.services.push_back(std::move(s));
    }

    BaseloadMode& bl = r.baseload;
    bl.kind = cfg.baseload.kind;
    if (bl.kind == BaseloadKind::Controlled) {
        bl.energy_cost = cfg.baseload.energy_price.empty()
                             ? Vec::Constant(cfg.horizon, cfg.baseload.energy_price_value)
                             : prices.on_horizon(cfg.baseload.energy_price, cfg.horizon, cfg.dt_hours, false);
    }
    if (bl.kind == BaseloadKind::SelfDispatch) {
        bl.e0 = cfg.baseload.e0_kw;
        bl.e0_shape = cfg.baseload.e0_width_kw * Mat::Identity(cfg.horizon, cfg.horizon);
    }
    bl.validate(cfg.horizon, n);
    return r;
}

UncertaintySet build_uncertainty_set(const RunConfig& cfg, const ScenarioSet& scenarios, Exec exec) {
    if (!cfg.uncertainty_file.empty()) {
        UncertaintySet u = uncertainty_set_from_json(read_json(cfg.uncertainty_file));
        if (u.dim() != scenarios.dim()) throw ValidationError(cfg.uncertainty_file + ": dimension mismatch");
        return u;
    }
    return fit_set(cfg.uncertainty_kind, scenarios.zeta(true), cfg.epsilon, exec);
}

InputOptions input_options(const RunConfig& cfg) {
    InputOptions o;
    o.slack_voltages = slack_voltages(cfg.delta);
    o.network_rows = cfg.network_rows;
    return o;
}

void BundleConfig::validate() const {
    if (feeders.empty()) throw ValidationError("bundle lists no feeders");
    for (const auto& f : feeders) require_file("feeder config", f);
    if (!(delta >= 0.0 && delta < 0.5)) throw ValidationError("delta must lie in [0, 0.5)");
    if (!(transfo_export_max >= 0.0 && transfo_import_max >= 0.0)) {
        throw ValidationError("transformer limits must be nonnegative");
    }
    if (containment_samples < 0) throw ValidationError("containment samples must be nonnegative");
    check_tolerances(tolerances);
}

BundleConfig load_bundle_config(const std::string& path) {
    const json j = read_json(path);
    BundleConfig c;
    c.path = path;
    try {
        if (j.value("schema", std::string()) != "flexcap.bundle.v1") {
            throw ParseError(path, "schema must be 'flexcap.bundle.v1'");
        }
        for (const json& f : j.at("feeders")) c.feeders.push_back(resolve(path, f.get<std::string>()));
        c.delta = j.value("delta", 0.0);
        if (j.contains("transformer")) {
            const json& t = j.at("transformer");
            c.transfo_export_max = t.value("export_max_kw", c.transfo_export_max);
            c.transfo_import_max = t.value("import_max_kw", c.transfo_import_max);
        }
        c.containment_samples = j.value("containment_samples", c.containment_samples);
        c.seed = j.value("seed", std::uint64_t{1});
        c.output = resolve(path, j.value("output", std::string("out")));
        if (j.contains("tolerances")) c.tolerances = tolerances_from(j.at("tolerances"), c.tolerances);
    } catch (const json::exception& e) {
        throw ParseError(path, e.what());
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return c;
}

BundleInputs load_bundle_inputs(const BundleConfig& cfg, Exec exec) {
    BundleInputs b;
    for (const auto& p : cfg.feeders) b.configs.push_back(load_run_config(p));
    for (const auto& c : b.configs) b.runs.push_back(load_run_inputs(c));
    std::set<std::string> names;
    for (const auto& c : b.configs) {
        if (!names.insert(c.name).second) throw ValidationError("duplicate feeder name '" + c.name + "'");
    }
    const RunInputs& first = b.runs.front();
    for (std::size_t k = 1; k < b.runs.size(); ++k) {
        const RunInputs& r = b.runs[k];
        if (r.services.size() != first.services.size()) throw ValidationError("feeders offer different services");
        for (std::size_t s = 0; s < r.services.size(); ++s) {
            if (r.services[s].name != first.services[s].name || r.services[s].kind != first.services[s].kind) {
                throw ValidationError("feeders offer different services");
            }
        }
        if (r.feeder.layout.drivers != first.feeder.layout.drivers ||
            r.feeder.layout.horizon != first.feeder.layout.horizon) {
            throw ValidationError("feeders must share the scenario layout");
        }
    }
    b.bundle.delta = cfg.delta;
    b.bundle.transfo_export_max = cfg.transfo_export_max;
    b.bundle.transfo_import_max = cfg.transfo_import_max;
    b.bundle.services = first.services;
    for (auto& s : b.bundle.services) {
        s.cost = Mat();
        s.eligible.clear();
    }
    for (std::size_t k = 0; k < b.runs.size(); ++k) {
        FeederCase fc;
        fc.model = b.runs[k].feeder;
        fc.uset = build_uncertainty_set(b.configs[k], b.runs[k].scenarios, exec);
        fc.services = b.runs[k].services;
        fc.baseload = b.runs[k].baseload;
        fc.network_rows = b.configs[k].network_rows;
        b.bundle.feeders.push_back(std::move(fc));
    }
    b.bundle.validate();
    return b;
}

}  // namespace flexcap
