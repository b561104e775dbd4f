#include "flexcap/config.hpp"
#include "flexcap/conic.hpp"
#include "flexcap/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

using namespace flexcap;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::string> kind;
    std::optional<double> eps;
    std::optional<double> delta;
    std::optional<std::string> strategy;
};

// Outputs are staged in memory and written only once every computation has succeeded.
class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) {}
    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
    void add(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }
    void commit() const {
        fs::create_directories(dir_);
        for (const auto& [name, content] : files_) {
            const fs::path target = fs::path(dir_) / name;
            const fs::path tmp = target.string() + ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary);
                if (!out) throw ValidationError("cannot write " + tmp.string());
                out << content;
            }
            fs::rename(tmp, target);
            std::cout << "wrote " << target.string() << "\n";
        }
    }

private:
    std::string dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

void add_common(CLI::App* cmd, Common& c, bool set_options) {
    cmd->add_option("--config", c.config, "run configuration (JSON)")->required();
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--out", c.out, "output directory");
    if (set_options) {
        cmd->add_option("--kind", c.kind, "uncertainty set: hyperbox|coverage|mvee|gaussian");
        cmd->add_option("--eps", c.eps, "uncertainty level in [0, 1)");
        cmd->add_option("--delta", c.delta, "slack-voltage half range (pu)");
    }
}

RunConfig run_config(const Common& c) {
    RunConfig cfg = load_run_config(c.config);
    if (c.seed) cfg.seed = cfg.validation.seed = *c.seed;
    if (!c.out.empty()) cfg.output = c.out;
    if (c.kind) cfg.uncertainty_kind = *c.kind;
    if (c.eps) cfg.epsilon = *c.eps;
    if (c.delta) cfg.delta = *c.delta;
    if (c.strategy) cfg.validation.strategy = strategy_from_string(*c.strategy);
    if (c.kind || c.eps) cfg.uncertainty_file.clear();
    cfg.validate();
    return cfg;
}

json set_report(const UncertaintySet& u, const ScenarioSet& sc) {
    json j = to_json(u);
    j["in_sample_coverage"] = u.coverage(sc.zeta(true));
    const Mat out = sc.zeta(false);
    if (out.rows() > 0) j["out_of_sample_coverage"] = u.coverage(out);
    return j;
}

int cmd_uncset(const Common& c) {
    const RunConfig cfg = run_config(c);
    ScenarioSet sc = load_scenarios(cfg.scenarios);
    if (cfg.in_sample >= 0) sc.split_first(cfg.in_sample);
    const UncertaintySet u = build_uncertainty_set(cfg, sc);
    json j = set_report(u, sc);
    std::printf("kind %s  epsilon %.4g  dim %d  in-sample coverage %.4f", u.method.c_str(), u.epsilon, u.dim(),
                j["in_sample_coverage"].get<double>());
    if (j.contains("out_of_sample_coverage")) std::printf("  out-of-sample %.4f", j["out_of_sample_coverage"].get<double>());
    std::printf("\n");
    Outputs out(cfg.output);
    out.add("uncset.json", j);
    out.commit();
    return 0;
}

AggregationResult solve_one(const RunConfig& cfg, const RunInputs& in, const UncertaintySet& u) {
    const auto input = make_input(in.feeder, u, in.services, in.baseload, input_options(cfg));
    AggregationResult r = aggregate(input, cfg.tolerances);
    if (r.cones != r.cones_expected) {
        throw InvariantError("registered cones " + std::to_string(r.cones) + " differ from the closed form " +
                             std::to_string(r.cones_expected));
    }
    return r;
}

void print_summary(const AggregationResult& r) {
    std::printf("objective %.6f\n", r.objective);
    for (const auto& s : r.services) {
        std::printf("service %-12s %-9s total %.4f kW  peak %.4f kW\n", s.name.c_str(), to_string(s.kind).c_str(),
                    s.e_kw.sum(), s.e_kw.size() ? s.e_kw.maxCoeff() : 0.0);
    }
    std::printf("cones %d (closed form %d)\n", r.cones, r.cones_expected);
}

int cmd_aggregate(const Common& c) {
    const RunConfig cfg = run_config(c);
    const RunInputs in = load_run_inputs(cfg);
    const UncertaintySet u = build_uncertainty_set(cfg, in.scenarios);
    const AggregationResult r = solve_one(cfg, in, u);
    print_summary(r);
    Outputs out(cfg.output);
    out.add("uncset.json", set_report(u, in.scenarios));
    out.add("result.json", to_json(r));
    out.commit();
    return 0;
}

Mat validation_rows(const RunConfig& cfg, const ScenarioSet& sc, const UncertaintySet& u) {
    if (cfg.validation_scenarios == "in") return sc.zeta(true);
    if (cfg.validation_scenarios == "out") return sc.zeta(false);
    std::mt19937_64 rng(cfg.seed);
    Mat rows(cfg.validation_samples, u.dim());
    for (int k = 0; k < cfg.validation_samples; ++k) rows.row(k) = sample_in_set(u, rng).transpose();
    return rows;
}

void print_report(const ViolationReport& rep) {
    std::printf("scenarios %d  outside %d (%.2f%%)  violations %d (%.2f%%)  in-set breaches %d\n", rep.scenarios,
                rep.outside, 100.0 * rep.outside_rate(), rep.violations, 100.0 * rep.violation_rate(),
                rep.in_set_breaches);
    for (int k = 0; k < kNumCategories; ++k) {
        if (rep.category_count[k] > 0) {
            std::printf("  %-14s %d\n", to_string(static_cast<Category>(k)).c_str(), rep.category_count[k]);
        }
    }
    std::printf("max current delta %.4f\n", rep.max_current_delta);
}

int cmd_validate(const Common& c, const std::string& result_path, const std::string& scenarios) {
    RunConfig cfg = run_config(c);
    if (!scenarios.empty()) cfg.validation_scenarios = scenarios;
    cfg.validate();
    const RunInputs in = load_run_inputs(cfg);
    const UncertaintySet u = build_uncertainty_set(cfg, in.scenarios);
    AggregationResult r;
    if (result_path.empty()) {
        r = solve_one(cfg, in, u);
    } else {
        std::ifstream f(result_path);
        if (!f) throw ParseError(result_path, "cannot open file");
        try {
            r = aggregation_result_from_json(json::parse(f));
        } catch (const json::exception& e) {
            throw ParseError(result_path, e.what());
        }
    }
    const ViolationReport rep = monte_carlo_validate(r, in.feeder, u, validation_rows(cfg, in.scenarios, u), cfg.validation);
    print_report(rep);
    Outputs out(cfg.output);
    if (result_path.empty()) out.add("result.json", to_json(r));
    out.add("validation.json", to_json(rep, true));
    out.add("validation.csv", to_csv(rep));
    out.commit();
    if (rep.in_set_breaches > 0) {
        spdlog::error("{} in-set scenarios violate a constraint", rep.in_set_breaches);
        return static_cast<int>(ExitCode::InvariantBreach);
    }
    return 0;
}

int cmd_multifeeder(const Common& c, bool validate) {
    BundleConfig cfg = load_bundle_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output = c.out;
    if (c.delta) cfg.delta = *c.delta;
    cfg.validate();
    const BundleInputs b = load_bundle_inputs(cfg);
    const CombinedResult comb = combine_feeders(solve_feeders(b.bundle, Exec::Parallel, cfg.tolerances), b.bundle,
                                                cfg.tolerances);
    std::vector<UncertaintySet> usets;
    for (const auto& f : b.bundle.feeders) usets.push_back(f.uset);
    const ContainmentReport cont = check_containment(comb, usets, cfg.containment_samples, cfg.seed);

    std::printf("combined objective %.6f\n", comb.objective);
    for (std::size_t f = 0; f < comb.feeders.size(); ++f) {
        std::printf("feeder %-12s objective %.6f\n", comb.feeder_names[f].c_str(), comb.feeders[f].objective);
    }
    for (const auto& s : comb.services) {
        std::printf("service %-12s %-9s total %.4f kW  peak %.4f kW\n", s.name.c_str(), to_string(s.kind).c_str(),
                    s.e_kw.sum(), s.e_kw.maxCoeff());
    }
    std::printf("containment %s over %d samples (max feeder norm %.9f)\n", cont.ok() ? "pass" : "FAIL", cont.samples,
                cont.max_feeder_norm);

    json j = to_json(comb);
    j["containment"] = to_json(cont);
    Outputs out(cfg.output);
    out.add("combined.json", j);
    bool breach = !cont.ok();
    if (validate) {
        ValidateOptions opt = b.configs.front().validation;
        opt.seed = cfg.seed;
        std::vector<FeederModel> models;
        for (const auto& r : b.runs) models.push_back(r.feeder);
        const ViolationReport rep =
            monte_carlo_validate_chain(comb, models, usets, b.runs.front().scenarios.zeta(false), opt);
        print_report(rep);
        out.add("validation.json", to_json(rep, true));
        out.add("validation.csv", to_csv(rep));
        breach = breach || rep.in_set_breaches > 0;
    }
    out.commit();
    return breach ? static_cast<int>(ExitCode::InvariantBreach) : 0;
}

int cmd_compare(const Common& c, const std::vector<std::string>& kinds) {
    const RunConfig cfg = run_config(c);
    const RunInputs in = load_run_inputs(cfg);
    std::vector<CompareCase> cases;
    for (const auto& k : kinds) cases.push_back({k, k == "mvee" ? 0.0 : cfg.epsilon});
    const auto rows = compare_uncertainty_sets(in.feeder, in.scenarios, cases, in.services, in.baseload,
                                               input_options(cfg), cfg.validation);
    const std::string table = to_csv(rows);
    std::cout << table;
    Outputs out(cfg.output);
    out.add("comparison.csv", table);
    out.commit();
    for (const auto& r : rows) {
        if (!r.error.empty()) spdlog::warn("{}: {}", r.kind, r.error);
    }
    return 0;
}

struct SynthArgs {
    std::string drivers = "load,pv";
    int horizon = 24;
    SynthOptions opt;
    std::string out;
    double hours = 24.0;
    double step_s = 10.0;
    double sigma_hz = 0.03;
    std::string frequency_out;
};

int cmd_synth(const SynthArgs& a) {
    if (a.out.empty() && a.frequency_out.empty()) throw ValidationError("synth needs --out or --frequency-out");
    std::string scenario_csv;
    std::string frequency_csv;
    if (!a.out.empty()) {
        ZetaLayout layout;
        std::stringstream ss(a.drivers);
        for (std::string d; std::getline(ss, d, ',');) {
            if (!d.empty()) layout.drivers.push_back(d);
        }
        layout.horizon = a.horizon;
        if (layout.drivers.empty() || a.horizon <= 0) throw ValidationError("synth needs drivers and a horizon");
        const ScenarioSet set = synthetic_scenarios(layout, a.opt);
        const fs::path tmp = fs::temp_directory_path() / ("flexcap_synth_" + std::to_string(a.opt.seed) + ".csv");
        save_scenarios(set, tmp.string());
        std::ifstream f(tmp);
        scenario_csv.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
        fs::remove(tmp);
    }
    if (!a.frequency_out.empty()) {
        if (!(a.hours > 0.0 && a.step_s > 0.0 && a.sigma_hz >= 0.0)) throw ValidationError("bad frequency parameters");
        // mean-reverting deviation with a one-minute correlation time
        std::mt19937_64 rng(a.opt.seed);
        std::normal_distribution<double> nd;
        const double phi = std::exp(-a.step_s / 60.0);
        const double innov = a.sigma_hz * std::sqrt(1.0 - phi * phi);
        const auto n = static_cast<long long>(std::llround(a.hours * 3600.0 / a.step_s));
        std::ostringstream os;
        os << "timestamp,hz\n";
        double dev = 0.0;
        char buf[64];
        for (long long k = 0; k < n; ++k) {
            dev = phi * dev + innov * nd(rng);
            std::snprintf(buf, sizeof buf, "%.1f,%.5f\n", static_cast<double>(k) * a.step_s, 50.0 + dev);
            os << buf;
        }
        frequency_csv = os.str();
    }
    for (const auto& [path, content] : {std::pair{a.out, scenario_csv}, std::pair{a.frequency_out, frequency_csv}}) {
        if (path.empty()) continue;
        const fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream f(p, std::ios::binary);
        if (!f) throw ValidationError("cannot write " + path);
        f << content;
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"Grid-aware flexibility aggregation of distributed energy resources"};
    app.require_subcommand(1);
    app.fallthrough();
    int jobs = 0;
    app.add_option("--jobs", jobs, "cap on worker threads (0: all cores)");

    Common c;
    auto* uncset = app.add_subcommand("uncset", "fit an uncertainty set to the in-sample scenarios");
    add_common(uncset, c, true);

    auto* aggregate = app.add_subcommand("aggregate", "solve the single-feeder aggregation");
    add_common(aggregate, c, true);

    std::string result_path;
    std::string scenarios;
    auto* validate = app.add_subcommand("validate", "Monte Carlo validation against exact power flow");
    add_common(validate, c, true);
    validate->add_option("--strategy", c.strategy, "activation: zero|max-flex|random|per-time-extreme");
    validate->add_option("--result", result_path, "previously written result.json (default: solve)");
    validate->add_option("--scenarios", scenarios, "out|in|in-set");

    bool mf_validate = false;
    auto* multifeeder = app.add_subcommand("multifeeder", "combine feeders under the transformer rating");
    multifeeder->add_option("--config", c.config, "bundle configuration (JSON)")->required();
    multifeeder->add_option("--seed", c.seed, "random seed");
    multifeeder->add_option("--out", c.out, "output directory");
    multifeeder->add_option("--delta", c.delta, "slack-voltage half range (pu)");
    multifeeder->add_flag("--validate", mf_validate, "validate substation activations on out-of-sample scenarios");

    std::vector<std::string> kinds{"hyperbox", "coverage", "mvee", "gaussian"};
    auto* compare = app.add_subcommand("compare", "solve and validate once per uncertainty-set kind");
    add_common(compare, c, false);
    compare->add_option("--eps", c.eps, "uncertainty level in [0, 1)");
    compare->add_option("--kinds", kinds, "set kinds")->delimiter(',');

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "write seeded synthetic scenarios or a frequency series");
    synth->add_option("--drivers", sa.drivers, "comma-separated driver names");
    synth->add_option("--horizon", sa.horizon, "steps per scenario");
    synth->add_option("--samples", sa.opt.samples, "scenario count");
    synth->add_option("--in-sample", sa.opt.in_sample, "leading rows marked in-sample");
    synth->add_option("--skew", sa.opt.skew, "lognormal log-scale (0: Gaussian)");
    synth->add_option("--time-corr", sa.opt.time_corr, "AR(1) coefficient across steps");
    synth->add_option("--seed", sa.opt.seed, "random seed");
    synth->add_option("--out", sa.out, "scenario CSV path");
    synth->add_option("--frequency-out", sa.frequency_out, "frequency CSV path");
    synth->add_option("--hours", sa.hours, "frequency series length (h)");
    synth->add_option("--step-s", sa.step_s, "frequency sampling interval (s)");
    synth->add_option("--sigma-hz", sa.sigma_hz, "frequency deviation standard deviation (Hz)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
    }

    try {
        set_max_threads(jobs);
        if (*uncset) return cmd_uncset(c);
        if (*aggregate) return cmd_aggregate(c);
        if (*validate) return cmd_validate(c, result_path, scenarios);
        if (*multifeeder) return cmd_multifeeder(c, mf_validate);
        if (*compare) return cmd_compare(c, kinds);
        if (*synth) return cmd_synth(sa);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(exit_code_for(e));
    }
    return 0;
}
