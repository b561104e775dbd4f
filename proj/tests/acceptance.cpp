// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include "fixtures.hpp"
#include "flexcap/config.hpp"
#include "flexcap/conic.hpp"
#include "flexcap/multifeeder.hpp"
#include "flexcap/validate.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fixtures;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Mat in_set_rows(const UncertaintySet& u, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Mat rows(n, u.dim());
    for (int k = 0; k < n; ++k) rows.row(k) = sample_in_set(u, rng).transpose();
    return rows;
}

Mat gaussian_rows(int n, const Mat& chol, const Vec& mu, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Mat out(n, mu.size());
    for (int r = 0; r < n; ++r) {
        Vec z(mu.size());
        for (int k = 0; k < mu.size(); ++k) z(k) = nd(rng);
        out.row(r) = (mu + chol * z).transpose();
    }
    return out;
}

int network_count(const ViolationReport& r) {
    return r.category_count[static_cast<int>(Category::Voltage)] + r.category_count[static_cast<int>(Category::Current)] +
           r.category_count[static_cast<int>(Category::PfDivergence)];
}

int resource_count(const ViolationReport& r) {
    int n = 0;
    for (int c = 0; c < kNumCategories; ++c) {
        if (is_resource(static_cast<Category>(c))) n += r.category_count[c];
    }
    return n;
}

struct Solved {
    RunConfig cfg;
    RunInputs in;
    UncertaintySet uset;
    AggregationResult result;
    double seconds = 0.0;
};

Solved solve_config(const std::string& path, bool network_rows = true) {
    const auto t0 = std::chrono::steady_clock::now();
    Solved s{load_run_config(path), {}, {}, {}, 0.0};
    s.cfg.network_rows = network_rows;
    s.in = load_run_inputs(s.cfg);
    s.uset = build_uncertainty_set(s.cfg, s.in.scenarios);
    s.result = aggregate(make_input(s.in.feeder, s.uset, s.in.services, s.in.baseload, input_options(s.cfg)),
                         s.cfg.tolerances);
    s.seconds = seconds_since(t0);
    return s;
}

// 1. Analytic optimum of the single-battery, two-step up service.
void analytic_optimum(Outcome& o) {
    for (double budget : {1.0, 0.5, 0.25}) {
        const auto t0 = std::chrono::steady_clock::now();
        const AggregationResult r = aggregate(analytic_input(budget));
        const double dt = seconds_since(t0);
        const Vec e = r.service("afrr_up").e_kw;
        const double expect = budget / std::sqrt(2.0);
        const double err = std::max(std::abs(e(0) - expect), std::abs(e(1) - expect)) / expect;
        o.require(err <= 1e-5, "E within 1e-5 of B/sqrt2 for B=" + std::to_string(budget));
        o.require(dt < 1.0, "runtime < 1 s");
        o.detail << "B=" << budget << " rel.err " << err << " (" << dt << " s); ";
    }
}

// 2. In-set (xi, zeta) tuples never violate resources and respect network limits within the allowance.
void robust_feasibility(Outcome& o) {
    for (const std::string name : {"twobus", "ieee33"}) {
        const auto t0 = std::chrono::steady_clock::now();
        const Solved s = solve_config(kData + "/" + name + "/config.json");
        ValidateOptions opt = s.cfg.validation;
        opt.strategy = Strategy::Random;
        opt.seed = 2024;
        const ViolationReport rep = monte_carlo_validate(s.result, s.in.feeder, s.uset, in_set_rows(s.uset, 1000, 7), opt);
        const double dt = seconds_since(t0);
        o.require(s.cfg.horizon == 12, name + " horizon 12");
        o.require(rep.scenarios == 1000 && rep.outside == 0, name + " 1000 in-set tuples");
        o.require(resource_count(rep) == 0, name + " zero resource violations");
        o.require(network_count(rep) == 0, name + " network excess within allowance");
        o.require(rep.in_set_breaches == 0, name + " zero in-set breaches");
        o.require(dt < 300.0, name + " runtime < 5 min");
        o.detail << name << ": " << rep.violations << " violations, max current delta " << rep.max_current_delta
                 << ", " << dt << " s; ";
    }
}

// 3. Registered cones equal the closed form on randomized dimensions.
void cone_count(Outcome& o) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> pick_t(1, 4), pick_s(1, 3), pick_b(1, 3), pick_bit(0, 1);
    int matched = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const int horizon = 2 * pick_t(rng);
        const int nb = pick_b(rng);
        std::vector<std::string> buses;
        std::vector<double> sizes;
        for (int k = 0; k < nb; ++k) {
            buses.push_back(std::string(1, static_cast<char>('a' + k)));
            sizes.push_back(0.5 + 0.5 * k);
        }
        FeederModel f = toy_union(buses, horizon, sizes);
        BaseloadMode bl;
        if (pick_bit(rng)) {
            f.fleet.ders.emplace_back(heat_pump("hp", buses[0], horizon, f.layout, f.dt));
            bl.kind = BaseloadKind::Controlled;
            bl.energy_cost = Vec::Constant(horizon, 0.1);
        }
        const int ns = pick_s(rng);
        const ServiceKind kinds[] = {ServiceKind::Symmetric, ServiceKind::Up, ServiceKind::Down};
        std::vector<ServiceSpec> svc;
        for (int s = 0; s < ns; ++s) svc.push_back(service("s" + std::to_string(s), kinds[(s + trial) % 3], horizon, 1.0));
        const ScenarioSet sc = scenarios(f.layout, 40 + trial, 0.0, 300, 300);
        const bool ellipsoid = pick_bit(rng);
        const UncertaintySet u = ellipsoid ? fit_gaussian_ellipsoid(sc.zeta(true), 0.1) : hyperbox(sc.zeta(true), 0.1);
        const AggregationProblem prob = build_problem(make_input(f, u, svc, bl));
        const long long expect = conic::count_cones(horizon, ns, ellipsoid ? 1 : 0, f.net.num_buses(),
                                                    f.net.num_branches(), f.fleet.size(), f.fleet.storage_count());
        const bool ok = prob.program.num_cones() == expect;
        matched += ok;
        o.require(ok, "trial " + std::to_string(trial) + " registered " + std::to_string(prob.program.num_cones()) +
                          " vs " + std::to_string(expect));
    }
    o.detail << matched << "/10 dimension tuples exact; ";
}

// 4. In-sample coverage by count and out-of-sample coverage on a 1200/400 Gaussian split.
void coverage(Outcome& o) {
    Mat chol(2, 2);
    chol << 1.0, 0.0, 0.5, 0.9;
    const Mat all = gaussian_rows(1600, chol, Vec::Zero(2), 404);
    const Mat train = all.topRows(1200);
    const Mat test = all.bottomRows(400);
    for (double eps : {0.05, 0.1, 0.2}) {
        const int need = static_cast<int>(std::ceil((1.0 - eps) * 1200 - 1e-9));
        for (const UncertaintySet& s : {coverage_ellipsoid(train, eps), hyperbox(train, eps)}) {
            int inside = 0;
            for (int r = 0; r < train.rows(); ++r) inside += s.contains(train.row(r).transpose());
            const double oos = s.coverage(test);
            o.require(inside >= need, s.method + " in-sample count at eps=" + std::to_string(eps));
            o.require(std::abs(oos - (1.0 - eps)) <= 0.03, s.method + " out-of-sample within 3 points at eps=" +
                                                               std::to_string(eps));
            o.detail << s.method << "(" << eps << ") " << inside << "/1200 in, " << oos << " out; ";
        }
    }
}

// 5. Violation rates: hyperbox at least each ellipsoidal variant, and at most epsilon.
void conservativeness(Outcome& o) {
    const int horizon = 4;
    FeederModel f;
    f.name = "pv";
    f.net = load_network(kData + "/twobus/network.json");
    f.dt = 24.0 / horizon;
    f.layout = ZetaLayout{{"pv"}, horizon};
    PvSpec pv;
    pv.name = "pv";
    pv.bus = "1";
    pv.mpp = Vec::Constant(horizon, 30.0);
    pv.m_pv = 3.0 * Mat::Identity(horizon, horizon);
    f.fleet.ders.emplace_back(pv);
    f.prosumers.push_back({"1", Vec::Constant(horizon, 20.0), 0.0, "", 0.0});
    const ScenarioSet sc = scenarios(f.layout, 31);
    ValidateOptions opt;
    opt.strategy = Strategy::PerTimeExtreme;
    const auto rows = compare_uncertainty_sets(f, sc, {{"hyperbox", 0.1}, {"coverage", 0.1}, {"mvee", 0.0}, {"gaussian", 0.1}},
                                               {service("down", ServiceKind::Down, horizon, 1.0)}, {}, {}, opt);
    for (const auto& r : rows) {
        o.require(r.error.empty(), r.kind + " solved");
        o.detail << r.kind << " " << 100.0 * r.violation_rate << "%; ";
    }
    const double box = rows[0].violation_rate;
    for (std::size_t k = 1; k < rows.size(); ++k) o.require(box >= rows[k].violation_rate, "hyperbox >= " + rows[k].kind);
    o.require(box <= 0.10, "hyperbox rate <= 10%");
    o.require(box > 0.0, "non-vacuous (hyperbox rate > 0)");
}

// 6. Grid awareness on the congested 33-bus feeder.
void grid_awareness(Outcome& o) {
    const std::string path = kData + "/ieee33/config_congested.json";
    const Solved aware = solve_config(path, true);
    const Solved unaware = solve_config(path, false);
    o.require(unaware.result.objective >= aware.result.objective * (1.0 - 1e-7), "objective unaware >= aware");
    ValidateOptions opt = aware.cfg.validation;
    opt.strategy = Strategy::MaxFlex;
    const Mat rows = in_set_rows(aware.uset, 500, 11);
    const ViolationReport ra = monte_carlo_validate(aware.result, aware.in.feeder, aware.uset, rows, opt);
    const ViolationReport ru = monte_carlo_validate(unaware.result, unaware.in.feeder, unaware.uset, rows, opt);
    const int cur = static_cast<int>(Category::Current);
    o.require(ru.category_count[cur] > 0, "grid-unaware shows current violations");
    o.require(network_count(ra) == 0, "grid-aware within the allowance");
    o.require(resource_count(ra) == 0 && resource_count(ru) == 0, "no resource violations");
    o.detail << "objective aware " << aware.result.objective << " unaware " << unaware.result.objective
             << "; current violations aware " << ra.category_count[cur] << "/500 unaware " << ru.category_count[cur]
             << "/500 (worst excess " << ru.worst[cur] << "); ";
}

// 7. Realized net benefit is never negative; a service priced below cost is not offered.
void cost_effectiveness(Outcome& o) {
    const Solved s = solve_config(kData + "/twobus/config.json");
    std::mt19937_64 rng(7);
    const Strategy cycle[] = {Strategy::Random, Strategy::PerTimeExtreme, Strategy::MaxFlex};
    double worst = HUGE_VAL;
    for (int k = 0; k < 10000; ++k) worst = std::min(worst, flexibility_value(s.result, select_activation(s.result, cycle[k % 3], rng)).net);
    o.require(worst >= -1e-6, "min net >= -1e-6");
    o.detail << "min net over 1e4 activations " << worst << "; ";

    FeederModel f = twobus_feeder(4, false);
    f.fleet.ders.erase(f.fleet.ders.begin() + 1);  // battery only
    const ScenarioSet sc = scenarios(f.layout, 9);
    const BessSpec& b = std::get<BessSpec>(f.fleet.ders[0]);
    const double cost = bess_capacity_cost(b, 1.0);
    for (double ratio : {0.8, 1.25}) {
        ServiceSpec up = service("up", ServiceKind::Up, 4, ratio * cost);
        up.cost = Mat::Constant(1, 4, cost);
        const AggregationResult r = aggregate(make_input(f, hyperbox(sc.zeta(true), 0.1), {up}, {}));
        const double peak = r.services[0].e_kw.maxCoeff();
        if (ratio < 1.0) o.require(peak <= 1e-6 * b.p_max, "below-cost service not offered");
        if (ratio > 1.0) o.require(peak > 1.0, "above-cost service offered");
        o.detail << "price/cost " << ratio << " -> peak E " << peak << " kW; ";
    }
}

// 8. Controlled baseload: zero energy budget and cost recovery at the optimum.
void baseload_budget(Outcome& o) {
    const Solved s = solve_config(kData + "/twobus/config.json");
    const AggregationResult& r = s.result;
    const double budget = (r.p0b_kw - r.b_kw).sum() / r.base_kva;
    o.require(std::abs(budget) <= 1e-8, "sum(p0b - b) = 0 within 1e-8 pu");
    double recovery = 0.0;
    for (int t = 0; t < r.horizon; ++t) recovery += s.in.baseload.energy_cost(t) * r.dt * (r.p0b_kw(t) - r.b_kw(t));
    o.require(recovery >= -1e-6 * r.base_kva, "cost recovery row holds");
    o.detail << "sum(p0b-b) " << budget << " pu; baseline energy value " << recovery << "; ";
}

// 9. Two-feeder combination: containment, monolithic bound and a binding transformer.
void multifeeder(Outcome& o) {
    const int horizon = 6;
    const UncertaintySet u = fit_gaussian_ellipsoid(scenarios(ZetaLayout{{"load", "pv"}, horizon}, 11).zeta(true), 0.1);
    FeederBundle bundle;
    for (const auto& [bus, size] : std::vector<std::pair<std::string, double>>{{"a", 1.0}, {"b", 0.5}}) {
        FeederCase fc;
        fc.model = toy_feeder(bus, horizon, size);
        fc.uset = u;
        fc.services = toy_services(horizon);
        bundle.feeders.push_back(fc);
    }
    bundle.services = toy_services(horizon);
    const auto feeders = solve_feeders(bundle);
    const CombinedResult c = combine_feeders(feeders, bundle);
    const ContainmentReport cont = check_containment(c, {u, u}, 1000, 5);
    o.require(cont.ok(), "containment sampling");
    const auto mono = aggregate(make_input(toy_union({"a", "b"}, horizon, {1.0, 0.5}), u, toy_services(horizon), {}));
    o.require(c.objective <= mono.objective + 1e-6 * std::max(1.0, mono.objective), "combined <= monolithic");
    o.detail << "containment max norm " << cont.max_feeder_norm << "; combined " << c.objective << " monolithic "
             << mono.objective << "; ";

    FeederBundle sym = bundle;
    sym.feeders[1].model = toy_feeder("b", horizon, 1.0);
    sym.services = {service("fcr", ServiceKind::Symmetric, horizon, 0.02)};
    for (auto& f : sym.feeders) f.services = sym.services;
    const auto sym_feeders = solve_feeders(sym);
    const CombinedResult wide = combine_feeders(sym_feeders, sym);
    const Vec hi = wide.base_max_kw.colwise().sum().transpose();
    const Vec lo = wide.base_min_kw.colwise().sum().transpose();
    const Vec& e = wide.service("fcr").e_kw;
    for (const bool export_side : {true, false}) {
        // limit at half the offer on the step where it bites first
        const Vec room = export_side ? Vec(hi + 0.5 * e) : Vec(0.5 * e - lo);
        Eigen::Index tb = 0;
        FeederBundle tightened = sym;
        (export_side ? tightened.transfo_export_max : tightened.transfo_import_max) = room.maxCoeff(&tb);
        const Vec e2 = combine_feeders(sym_feeders, tightened).service("fcr").e_kw;
        const double headroom = export_side ? tightened.transfo_export_max - hi(tb) : tightened.transfo_import_max + lo(tb);
        const std::string side = export_side ? "export" : "import";
        o.require(e(tb) > 1.0, side + " service offered without the limit");
        o.require(e2(tb) < e(tb) - 1e-6, side + " limit shrinks the symmetric service");
        o.require(e2(tb) <= headroom + 1e-6, side + " headroom respected");
        o.require(e2(tb) >= headroom - 1e-4 * std::max(1.0, headroom), side + " row binding");
        o.detail << side << " limit: FCR at t=" << tb << " " << e(tb) << " -> " << e2(tb) << " kW (headroom " << headroom
                 << "); ";
    }
}

// 10. FCR energy statistics: analytic cases and a noisy series.
void fcr_statistics(Outcome& o) {
    auto series = [](int n, auto hz) {
        std::vector<FrequencySample> s;
        for (int k = 0; k < n; ++k) s.push_back({10.0 * k, hz(k)});
        return s;
    };
    const int per_block = 4 * 360;
    const auto c = fcr_energy_requirements(series(per_block, [](int) { return 49.8; }), 4.0);
    o.require(c.bias[0] == 1.0 && c.throughput[0] == 1.0, "constant deviation: bias = throughput = 1");
    const auto z = fcr_energy_requirements(series(per_block, [](int) { return 50.0; }), 4.0);
    o.require(z.bias[0] == 0.0 && z.throughput[0] == 0.0, "zero deviation: 0, 0");
    const auto sq = fcr_energy_requirements(series(per_block, [](int k) { return (k / 60) % 2 ? 49.8 : 50.2; }), 4.0);
    o.require(sq.bias[0] == 0.0 && sq.throughput[0] == 1.0, "square wave: bias 0, throughput 1");
    std::mt19937_64 rng(10);
    std::normal_distribution<double> nd(0.0, 0.03);
    double dev = 0.0;
    const auto noisy = fcr_energy_requirements(series(per_block * 30, [&](int) {
                                                   dev = 0.99 * dev + 0.14 * nd(rng);
                                                   return 50.0 + dev;
                                               }),
                                               4.0);
    o.require(noisy.bias_p95 < noisy.throughput_p95, "noisy: p95 bias < p95 throughput");
    o.detail << "noisy p95 bias " << noisy.bias_p95 << " throughput " << noisy.throughput_p95 << "; ";
}

// 11. Superposition, quadrant signs, symmetric negation and affine invariance.
void property_suites(Outcome& o) {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon);
    const UncertaintySet u = fit_gaussian_ellipsoid(scenarios(f.layout, 5).zeta(true), 0.1);
    std::vector<ServiceSpec> svc = {service("fcr", ServiceKind::Symmetric, horizon, 2.0, 2),
                                    service("up", ServiceKind::Up, horizon, 1.0),
                                    service("down", ServiceKind::Down, horizon, 1.0)};
    BaseloadMode bl;
    bl.kind = BaseloadKind::Controlled;
    bl.energy_cost = Vec::Constant(horizon, 0.1);
    const AggregationResult r = aggregate(make_input(f, u, svc, bl));
    std::mt19937_64 rng(21);
    double sup = 0.0;
    double neg = 0.0;
    bool quadrant = true;
    for (int k = 0; k < 1000; ++k) {
        const Activation a = select_activation(r, Strategy::Random, rng);
        const Vec zeta = sample_in_set(u, rng);
        const Disaggregation all = disaggregate(r, a, zeta);
        Vec sum = disaggregate(r, Activation::zeros(r), zeta).total;
        for (std::size_t s = 0; s < r.services.size(); ++s) {
            Activation one = Activation::zeros(r);
            one.xi[s] = a.xi[s];
            sum += disaggregate(r, one, Vec()).total - r.baseline();
        }
        sup = std::max(sup, (all.total - sum).cwiseAbs().maxCoeff());
        quadrant = quadrant && (all.gcp_service_kw[1].array() >= 0.0).all() && (all.gcp_service_kw[2].array() <= 0.0).all();
        Activation p = Activation::zeros(r);
        Activation m = Activation::zeros(r);
        p.xi[0] = a.xi[0];
        m.xi[0] = -a.xi[0];
        neg = std::max(neg, (disaggregate(r, p, Vec()).service[0] + disaggregate(r, m, Vec()).service[0]).cwiseAbs().maxCoeff());
    }
    o.require(sup <= 1e-12, "superposition to 1e-12");
    o.require(quadrant, "quadrant signs");
    o.require(neg == 0.0, "symmetric negation exact");
    o.detail << "superposition " << sup << ", negation " << neg << "; ";

    std::normal_distribution<double> nd;
    const Mat cloud = gaussian_rows(150, Mat::Identity(3, 3), Vec::Zero(3), 22);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Mat a(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = nd(rng) + (i == j ? 2.0 : 0.0);
        const Vec shift{{nd(rng), nd(rng), nd(rng)}};
        const Mat mapped = (cloud * a.transpose()).rowwise() + shift.transpose();
        auto gap = [&](const UncertaintySet& base, const UncertaintySet& img) {
            const Mat expect = a * base.shape * base.shape.transpose() * a.transpose();
            const double g = (img.shape * img.shape.transpose() - expect).cwiseAbs().maxCoeff() / expect.cwiseAbs().maxCoeff();
            const double c = (img.center - (a * base.center + shift)).norm() / (1.0 + img.center.norm());
            return std::max(g, c);
        };
        worst = std::max(worst, gap(fit_gaussian_ellipsoid(cloud, 0.1), fit_gaussian_ellipsoid(mapped, 0.1)));
        worst = std::max(worst, gap(min_volume_ellipsoid(cloud), min_volume_ellipsoid(mapped)));
        worst = std::max(worst, gap(coverage_ellipsoid(cloud, 0.1), coverage_ellipsoid(mapped, 0.1)));
    }
    o.require(worst <= 1e-6, "affine invariance to 1e-6");
    o.detail << "affine invariance " << worst << "; ";
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"analytic single-battery optimum", analytic_optimum},
        {"robust feasibility, 2-bus and 33-bus", robust_feasibility},
        {"cone-count identity", cone_count},
        {"uncertainty-set coverage", coverage},
        {"conservativeness ordering", conservativeness},
        {"grid awareness, congested 33-bus", grid_awareness},
        {"cost-effectiveness", cost_effectiveness},
        {"baseload budget", baseload_budget},
        {"multifeeder combination", multifeeder},
        {"FCR energy statistics", fcr_statistics},
        {"property suites", property_suites},
    };
    int failed = 0;
    std::vector<bool> selected(criteria.size(), argc < 2);
    for (int a = 1; a < argc; ++a) {
        const int k = std::atoi(argv[a]);
        if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
    }
    int ran = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (!selected[k]) continue;
        ++ran;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[k].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "]";
        }
        failed += !o.pass;
        std::printf("criterion %2zu %s  %-38s %.1f s  %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    seconds_since(t0), o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
