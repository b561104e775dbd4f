#include "flexcap/feeder.hpp"
#include "flexcap/synth.hpp"
#include "flexcap/validate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

using namespace flexcap;

namespace {

double best_of(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const std::string& name, int reps, const std::function<void(Exec)>& f, const std::function<bool()>& same) {
    const double serial = best_of(reps, [&] { f(Exec::Serial); });
    const double parallel = best_of(reps, [&] { f(Exec::Parallel); });
    std::printf("%-24s %12.4f %12.4f %8.2fx  %s\n", name.c_str(), serial * 1e3, parallel * 1e3, serial / parallel,
                same() ? "identical" : "DIFFERENT");
}

FeederModel ieee33(const std::string& data, int horizon) {
    FeederModel f;
    f.name = "ieee33";
    f.net = load_network(data + "/ieee33/network.json");
    f.dt = 24.0 / horizon;
    f.layout = ZetaLayout{{"load", "pv"}, horizon};
    f.prosumers = load_prosumers(data + "/ieee33/prosumers.json", f.layout);
    return f;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial reference versus OpenMP kernels"};
    std::string data = FLEXCAP_DATA_DIR;
    int horizon = 24;
    int samples = 1600;
    int reps = 3;
    int jobs = 0;
    app.add_option("--data", data, "data directory");
    app.add_option("--horizon", horizon, "steps");
    app.add_option("--samples", samples, "scenario rows");
    app.add_option("--reps", reps, "repetitions (best time reported)");
    app.add_option("--jobs", jobs, "thread cap");
    CLI11_PARSE(app, argc, argv);
    set_max_threads(jobs);

    std::printf("openmp %s, threads %d\n", openmp_enabled() ? "on" : "off", max_threads());
    std::printf("%-24s %12s %12s %9s\n", "kernel", "serial ms", "parallel ms", "speedup");

    const FeederModel f = ieee33(data, horizon);
    const CMat op = f.nominal_injections();
    LinearGridModel ls;
    LinearGridModel lp;
    row("linearize", reps, [&](Exec e) {
        LinearizeOptions o;
        o.exec = e;
        (e == Exec::Serial ? ls : lp) = linearize(f.net, op, 1.0, o);
    }, [&] {
        for (int t = 0; t < horizon; ++t) {
            if (ls.steps[t].kv != lp.steps[t].kv || ls.steps[t].ki != lp.steps[t].ki) return false;
        }
        return true;
    });

    SynthOptions so;
    so.samples = samples;
    so.in_sample = samples;
    const ScenarioSet sc = synthetic_scenarios(ZetaLayout{{"load", "pv"}, horizon}, so);
    const Mat rows = sc.zeta(true);
    Mat ds;
    Mat dp;
    row("pairwise_distances", reps, [&](Exec e) { (e == Exec::Serial ? ds : dp) = pairwise_distances(rows, e); },
        [&] { return ds == dp; });

    UncertaintySet cs;
    UncertaintySet cp;
    row("coverage_ellipsoid", reps, [&](Exec e) { (e == Exec::Serial ? cs : cp) = coverage_ellipsoid(rows, 0.1, e); },
        [&] { return cs.center == cp.center && cs.shape == cp.shape; });

    FeederModel g = f;
    g.fleet.ders.clear();
    BessSpec b;
    b.name = "bess18";
    b.bus = "18";
    b.p_min = -300.0;
    b.p_max = 300.0;
    b.soe_max = 1200.0;
    b.soe_0 = 600.0;
    b.dt = g.dt;
    g.fleet.ders.emplace_back(b);
    ServiceSpec up;
    up.name = "afrr_up";
    up.kind = ServiceKind::Up;
    up.price = Vec::Constant(horizon, 1.0);
    const UncertaintySet u = fit_gaussian_ellipsoid(rows, 0.1);
    const AggregationResult r = aggregate(make_input(g, u, {up}, BaseloadMode{}));
    ViolationReport vs;
    ViolationReport vp;
    const Mat mc = rows.topRows(std::min<Eigen::Index>(rows.rows(), 400));
    row("monte_carlo_validate", reps, [&](Exec e) {
        ValidateOptions o;
        o.exec = e;
        o.strategy = Strategy::Random;
        (e == Exec::Serial ? vs : vp) = monte_carlo_validate(r, g, u, mc, o);
    }, [&] { return to_json(vs, true).dump() == to_json(vp, true).dump(); });
    return 0;
}
