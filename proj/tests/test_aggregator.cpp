#include "fixtures.hpp"

#include "flexcap/aggregator.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace flexcap;
using namespace fixtures;

namespace {

std::shared_ptr<AggregationInput> copy(const std::shared_ptr<AggregationInput>& in) {
    return std::make_shared<AggregationInput>(*in);
}

// Worst-case slack of every linear-model row at (activation, zeta).
Vec row_slack(const AggregationProblem& prob, const AggregationResult& r, const Activation& a, const Vec& zeta) {
    const Disaggregation d = disaggregate(r, a, zeta);
    const ConstraintSystem& sys = prob.system;
    Vec slack(sys.rows());
    for (int i = 0; i < sys.rows(); ++i) {
        const Vec& u = sys.storage(i) ? d.energy_weighted() : d.total;
        const double lhs = sys.w.row(i).dot(u.transpose());
        const double rhs = sys.z0(i) + (zeta.size() > 0 ? sys.mz.row(i).dot(zeta) : 0.0);
        slack(i) = rhs - lhs;
    }
    return slack;
}

Vec unit_direction(std::mt19937_64& rng, int n, ServiceKind kind, double radius) {
    std::normal_distribution<double> nd;
    Vec v(n);
    for (int k = 0; k < n; ++k) v(k) = nd(rng);
    if (kind == ServiceKind::Up) v = v.cwiseAbs();
    if (kind == ServiceKind::Down) v = -v.cwiseAbs();
    return radius * v / v.norm();
}

Vec in_set(std::mt19937_64& rng, const UncertaintySet& u, bool boundary) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int d = u.dim();
    if (u.kind == SetKind::Hyperbox) {
        Vec z(d);
        for (int k = 0; k < d; ++k) {
            const double x = boundary ? (uni(rng) < 0.5 ? 0.0 : 1.0) : uni(rng);
            z(k) = u.lower(k) + x * (u.upper(k) - u.lower(k));
        }
        return z;
    }
    const double rad = boundary ? 1.0 : std::pow(uni(rng), 1.0 / d);
    return u.center + u.shape * unit_direction(rng, d, ServiceKind::Symmetric, rad);
}

}  // namespace

TEST_CASE("single battery, two steps, up service: E = (B/sqrt2, B/sqrt2)") {
    for (double budget : {1.0, 0.5}) {
        const AggregationResult r = aggregate(analytic_input(budget));
        const Vec e = r.service("afrr_up").e_kw;
        const double expect = budget / std::sqrt(2.0);
        CHECK(std::abs(e(0) - expect) <= 1e-5 * expect);
        CHECK(std::abs(e(1) - expect) <= 1e-5 * expect);
        CHECK(std::abs(r.objective - std::sqrt(2.0) * budget) <= 1e-5 * budget);
    }
}

TEST_CASE("power limit caps the analytic optimum") {
    // budget 4 kWh over two steps with 1 kW power: the box binds, E = (1, 1)
    const AggregationResult r = aggregate(analytic_input(4.0));
    const Vec e = r.service("afrr_up").e_kw;
    CHECK(std::abs(e(0) - 1.0) <= 1e-5);
    CHECK(std::abs(e(1) - 1.0) <= 1e-5);
}

TEST_CASE("zero prices give a zero objective") {
    auto in = analytic_input(1.0);
    in->services[0].price.setZero();
    const AggregationResult r = aggregate(in);
    CHECK(std::abs(r.objective) <= 1e-8);
}

TEST_CASE("a service priced below cost is not offered") {
    auto in = analytic_input(1.0);
    in->services[0].cost = Mat::Constant(1, 2, 2.0);
    const AggregationResult r = aggregate(in);
    CHECK(r.service("afrr_up").e_kw.cwiseAbs().maxCoeff() <= 1e-6);
    auto cheap = analytic_input(1.0);
    cheap->services[0].cost = Mat::Constant(1, 2, 0.5);
    CHECK(aggregate(cheap).service("afrr_up").e_kw.minCoeff() > 0.1);
}

TEST_CASE("down service mirrors the up optimum on the charge side") {
    auto in = analytic_input(1.0);
    in->services[0].kind = ServiceKind::Down;
    in->services[0].name = "afrr_down";
    const AggregationResult r = aggregate(in);
    const Vec e = r.service("afrr_down").e_kw;
    CHECK(std::abs(e(0) - 1.0 / std::sqrt(2.0)) <= 1e-5);
    CHECK(std::abs(e(1) - 1.0 / std::sqrt(2.0)) <= 1e-5);
    const Activation a{{Vec::Constant(2, -0.5)}, {}};
    CHECK((disaggregate(r, a, Vec()).gcp_service_kw[0].array() <= 0.0).all());
}

TEST_CASE("symmetric service has no epsilon variables and a block-constant ellipsoid") {
    auto in = analytic_input(1.0, 4);
    in->services = {service("fcr", ServiceKind::Symmetric, 4, 1.0, 2)};
    const AggregationProblem prob = build_problem(in);
    CHECK(prob.index.services[0].eps.size == 0);
    for (const auto& b : prob.program.blocks()) CHECK(b.name.rfind("eps", 0) != 0);
    const AggregationResult r = solve_aggregation(prob);
    const Vec e = r.service("fcr").e_kw;
    CHECK(std::abs(e(0) - e(1)) <= 1e-6);
    CHECK(std::abs(e(2) - e(3)) <= 1e-6);
    CHECK(e.minCoeff() > 0.0);
}

TEST_CASE("eligibility mask zeroes a resource's policy rows") {
    auto in = analytic_input(1.0);
    in->fleet.ders.emplace_back(battery("other", "1", 1.0, 2.0, 1.0));
    in->der_bus = {1, 1};
    in->services[0].eligible = {false, true};
    const AggregationProblem prob = build_problem(in);
    const AggregationResult r = solve_aggregation(prob);
    const ServiceResult& s = r.service("afrr_up");
    for (int t = 0; t < 2; ++t) {
        CHECK(s.policy.row(in->column(t, 0, false)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.policy.row(in->column(t, 0, true)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(s.e_kw.minCoeff() > 0.5);
}

TEST_CASE("no services with an uncontrolled baseload has zero objective") {
    auto none = analytic_input(1.0);
    none->services.clear();
    const AggregationResult r = aggregate(none);
    CHECK(r.services.empty());
    CHECK(std::abs(r.objective) <= 1e-9);
}

TEST_CASE("build_problem rejects inconsistent inputs") {
    auto in = analytic_input(1.0);
    in->services[0].block_length = 3;
    CHECK_THROWS_AS(build_problem(in), ValidationError);
    auto neg = analytic_input(1.0);
    neg->services[0].price(0) = -1.0;
    CHECK_THROWS_AS(build_problem(neg), ValidationError);
    // uncertain prosumption without a set
    FeederModel f = twobus_feeder(4, false);
    CHECK_THROWS_AS(build_problem(make_input(f, UncertaintySet::none(), {service("s", ServiceKind::Up, 4, 1.0)}, {})),
                    ValidationError);
}

TEST_CASE("infeasible instance names the offending rows") {
    FeederModel f = twobus_feeder(4, false);
    f.net.buses[1].v_min = 0.9999;  // the nominal load already violates this
    const ScenarioSet sc = fixtures::scenarios(f.layout, 3);
    const auto in = make_input(f, hyperbox(sc.zeta(true), 0.0), {service("s", ServiceKind::Up, 4, 1.0)}, {});
    try {
        aggregate(in);
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("v_min:1") != std::string::npos);
    }
}

TEST_CASE("cone count equals the closed form on randomized dimensions") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick_t(1, 3), pick_s(1, 3), pick_n(0, 2);
    for (int trial = 0; trial < 10; ++trial) {
        const int horizon = pick_t(rng) * 2;
        FeederModel f = twobus_feeder(horizon, pick_n(rng) > 0);
        const int extra = pick_n(rng);
        for (int k = 0; k < extra; ++k) f.fleet.ders.emplace_back(battery("b" + std::to_string(k), "1", 20, 40, 20, f.dt));
        std::vector<ServiceSpec> svc;
        const int ns = pick_s(rng);
        const ServiceKind kinds[] = {ServiceKind::Symmetric, ServiceKind::Up, ServiceKind::Down};
        for (int s = 0; s < ns; ++s) svc.push_back(service("s" + std::to_string(s), kinds[s], horizon, 1.0));
        const ScenarioSet sc = fixtures::scenarios(f.layout, 100 + trial, 0.0, 300, 300);
        const UncertaintySet u = trial % 2 ? fit_gaussian_ellipsoid(sc.zeta(true), 0.1) : hyperbox(sc.zeta(true), 0.1);
        BaseloadMode bl;
        if (trial % 3 == 1) {
            bl.kind = BaseloadKind::Controlled;
            bl.energy_cost = Vec::Constant(horizon, 0.1);
        }
        const AggregationProblem prob = build_problem(make_input(f, u, svc, bl));
        const int n_u = u.kind == SetKind::Ellipsoid ? 1 : 0;
        const long long expect = conic::count_cones(horizon, ns, n_u, f.net.num_buses(), f.net.num_branches(),
                                                    f.fleet.size(), f.fleet.storage_count());
        CHECK(prob.program.num_cones() == expect);
        CHECK(prob.index.n_s == ns);
        CHECK(prob.index.n_u == n_u);
    }
}

TEST_CASE("two-bus instance: robust feasibility, superposition and quadrant signs") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon);
    const ScenarioSet sc = fixtures::scenarios(f.layout, 5);
    const UncertaintySet u = fit_gaussian_ellipsoid(sc.zeta(true), 0.1);
    std::vector<ServiceSpec> svc = {service("fcr", ServiceKind::Symmetric, horizon, 2.0, 2),
                                    service("up", ServiceKind::Up, horizon, 1.0),
                                    service("down", ServiceKind::Down, horizon, 1.0)};
    svc[0].energy_factor = 0.25;
    BaseloadMode bl;  // the heat pump needs a scheduled baseline
    bl.kind = BaseloadKind::Controlled;
    bl.energy_cost = Vec::Constant(horizon, 0.1);
    const AggregationProblem prob = build_problem(make_input(f, u, svc, bl));
    const AggregationResult r = solve_aggregation(prob);
    REQUIRE(r.objective > 0.0);
    for (const auto& s : r.services) CHECK(s.e_kw.minCoeff() >= -1e-9);

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = HUGE_VAL;
    for (int k = 0; k < 1000; ++k) {
        Activation a = Activation::zeros(r);
        for (std::size_t s = 0; s < r.services.size(); ++s) {
            a.xi[s] = unit_direction(rng, horizon, r.services[s].kind, k % 2 ? 1.0 : uni(rng));
        }
        const Vec zeta = in_set(rng, u, k % 3 == 0);
        worst = std::min(worst, row_slack(prob, r, a, zeta).minCoeff());

        if (k < 50) {
            const Disaggregation all = disaggregate(r, a, zeta);
            Vec sum = disaggregate(r, Activation::zeros(r), zeta).total;
            for (std::size_t s = 0; s < r.services.size(); ++s) {
                Activation one = Activation::zeros(r);
                one.xi[s] = a.xi[s];
                sum += disaggregate(r, one, Vec()).total - r.baseline();
            }
            CHECK((all.total - sum).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((all.gcp_service_kw[1].array() >= 0.0).all());
            CHECK((all.gcp_service_kw[2].array() <= 0.0).all());
            Activation neg = Activation::zeros(r);
            Activation pos = Activation::zeros(r);
            pos.xi[0] = a.xi[0];
            neg.xi[0] = -a.xi[0];
            CHECK((disaggregate(r, pos, Vec()).service[0] + disaggregate(r, neg, Vec()).service[0])
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
    }
    CHECK(worst >= -1e-6);

    Activation wrong = Activation::zeros(r);
    wrong.xi[1](0) = -0.1;
    CHECK_THROWS_AS(disaggregate(r, wrong, Vec()), ValidationError);
    wrong = Activation::zeros(r);
    wrong.xi[2](0) = 0.1;
    CHECK_THROWS_AS(disaggregate(r, wrong, Vec()), ValidationError);
}

TEST_CASE("zero activation at zero zeta reproduces the baseline plan") {
    auto in = analytic_input(1.0);
    const AggregationResult r = aggregate(in);
    const Disaggregation d = disaggregate(r, Activation::zeros(r), Vec());
    CHECK(d.total == r.baseline());
    const FlexibilityValue v = flexibility_value(r, Activation::zeros(r));
    CHECK(v.benefit == 0.0);
    CHECK(v.cost == 0.0);
    CHECK(v.net == 0.0);
}

TEST_CASE("cost-effectiveness: realized net benefit is never negative") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon, false);
    const ScenarioSet sc = fixtures::scenarios(f.layout, 8);
    std::vector<ServiceSpec> svc = {service("fcr", ServiceKind::Symmetric, horizon, 3.0),
                                    service("up", ServiceKind::Up, horizon, 1.5)};
    const BessSpec& b = std::get<BessSpec>(f.fleet.ders[0]);
    for (auto& s : svc) {
        s.cost = Mat::Zero(f.fleet.size(), horizon);
        s.cost.row(0).setConstant(bess_capacity_cost(b, 1.0) * 5.0);
    }
    const AggregationResult r = aggregate(make_input(f, hyperbox(sc.zeta(true), 0.05), svc, {}));
    for (const auto& s : r.services) CHECK(s.cost_slack.minCoeff() >= -1e-6);
    REQUIRE(r.services[0].e_kw.maxCoeff() + r.services[1].e_kw.maxCoeff() > 1.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = HUGE_VAL;
    for (int k = 0; k < 1000; ++k) {
        Activation a = Activation::zeros(r);
        for (std::size_t s = 0; s < r.services.size(); ++s) {
            a.xi[s] = unit_direction(rng, horizon, r.services[s].kind, uni(rng));
        }
        worst = std::min(worst, flexibility_value(r, a).net);
    }
    CHECK(worst >= -1e-6);
    // single unit activation: net = (g_t - c . policy_t) E_t
    Activation e0 = Activation::zeros(r);
    e0.xi[1](0) = 1.0;
    const ServiceResult& up = r.services[1];
    double c = 0.0;
    for (int col = 0; col < r.num_columns(); ++col) {
        const int rr = col % (2 * r.num_ders);
        if (rr < r.num_ders) c += up.cost(rr, col / (2 * r.num_ders)) * up.policy(col, 0) * r.base_kva;
    }
    CHECK(std::abs(flexibility_value(r, e0).net - (up.benefit(0) * up.e_kw(0) - c)) <= 1e-9);
}

TEST_CASE("removing network rows never lowers the objective") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon, false);
    f.net.branches[0].i_max = 0.08;
    const ScenarioSet sc = fixtures::scenarios(f.layout, 12);
    const UncertaintySet u = hyperbox(sc.zeta(true), 0.1);
    const std::vector<ServiceSpec> svc = {service("fcr", ServiceKind::Symmetric, horizon, 1.0)};
    InputOptions with;
    InputOptions without;
    without.network_rows = false;
    const double aware = aggregate(make_input(f, u, svc, {}, with)).objective;
    const double unaware = aggregate(make_input(f, u, svc, {}, without)).objective;
    CHECK(unaware >= aware - 1e-6 * std::abs(aware));
    CHECK(unaware > aware * 1.01);
}

TEST_CASE("scaling all prices scales the objective and keeps the ellipsoid") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon, false);
    const ScenarioSet sc = fixtures::scenarios(f.layout, 13);
    const UncertaintySet u = hyperbox(sc.zeta(true), 0.1);
    std::vector<ServiceSpec> svc = {service("up", ServiceKind::Up, horizon, 1.0)};
    svc[0].price << 1.0, 2.0, 3.0, 1.5;
    const AggregationResult a = aggregate(make_input(f, u, svc, {}));
    svc[0].price *= 7.0;
    const AggregationResult b = aggregate(make_input(f, u, svc, {}));
    CHECK(std::abs(b.objective / a.objective - 7.0) <= 1e-6);
    CHECK((a.service("up").e_kw - b.service("up").e_kw).cwiseAbs().maxCoeff() <= 1e-4 * a.service("up").e_kw.maxCoeff());
}

TEST_CASE("controlled baseload: energy balance and cost recovery") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon, false);
    const ScenarioSet sc = fixtures::scenarios(f.layout, 21);
    BaseloadMode bl;
    bl.kind = BaseloadKind::Controlled;
    bl.energy_cost.resize(horizon);
    bl.energy_cost << 0.1, 0.3, 0.2, 0.4;
    bl.wear_cost = Mat::Zero(f.fleet.size(), horizon);
    bl.wear_cost.row(0).setConstant(0.01);
    const AggregationResult r =
        aggregate(make_input(f, fit_gaussian_ellipsoid(sc.zeta(true), 0.1), {service("up", ServiceKind::Up, horizon, 1.0)}, bl));
    CHECK(std::abs((r.p0b_kw - r.b_kw).sum()) <= 1e-8 * r.base_kva);
    double recovery = 0.0;
    for (int t = 0; t < horizon; ++t) recovery += bl.energy_cost(t) * f.dt * (r.p0b_kw(t) - r.b_kw(t));
    double wear = 0.0;
    for (int t = 0; t < horizon; ++t) wear += bl.wear_cost(0, t) * std::abs(r.ub(t * 2 * r.num_ders)) * r.base_kva;
    CHECK(recovery - wear >= -1e-6 * r.base_kva);
}

TEST_CASE("self-dispatch: GCP stays on the prescribed ellipsoid and L compensates prosumption") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon, false);
    f.prosumers[0].scale = 2.0;
    std::get<PvSpec>(f.fleet.ders[1]).m_pv *= 0.25;
    f.fleet.ders[0] = battery("bess", "1", 50.0, 1000.0, 500.0, f.dt);
    const ScenarioSet sc = fixtures::scenarios(f.layout, 31);
    const UncertaintySet u = fit_gaussian_ellipsoid(sc.zeta(true), 0.1);
    BaseloadMode bl;
    bl.kind = BaseloadKind::SelfDispatch;
    const auto probe = make_input(f, u, {service("fcr", ServiceKind::Symmetric, horizon, 1.0)}, {});
    const GcpModel g = gcp_model(*probe);
    bl.e0 = g.b * f.net.base_kva;
    bl.e0_shape = Mat::Identity(horizon, horizon) * 2.0;
    const AggregationProblem prob =
        build_problem(make_input(f, u, {service("fcr", ServiceKind::Symmetric, horizon, 1.0)}, bl));
    const AggregationResult r = solve_aggregation(prob);
    CHECK(prob.index.n_s == 2);
    std::mt19937_64 rng(1);
    double worst = HUGE_VAL;
    for (int k = 0; k < 200; ++k) {
        Activation a = Activation::zeros(r);
        a.xi[0] = unit_direction(rng, horizon, ServiceKind::Symmetric, 1.0);
        a.xi0 = unit_direction(rng, horizon, ServiceKind::Symmetric, 1.0);
        const Vec zeta = in_set(rng, u, true);
        const Disaggregation d = disaggregate(r, a, zeta);
        // linear GCP export of the realized injections
        const Vec gcp = g.b * r.base_kva + g.g * d.total * r.base_kva + g.mb * zeta * r.base_kva;
        const Vec expect = d.gcp_baseload_kw + d.gcp_service_kw[0];
        CHECK((gcp - expect).cwiseAbs().maxCoeff() <= 1e-6 * r.base_kva);
        worst = std::min(worst, row_slack(prob, r, a, zeta).minCoeff());
    }
    CHECK(worst >= -1e-6);
}

TEST_CASE("result JSON round-trip keeps disaggregation identical") {
    const int horizon = 4;
    FeederModel f = twobus_feeder(horizon, false);
    const ScenarioSet sc = fixtures::scenarios(f.layout, 41);
    const AggregationResult r = aggregate(make_input(f, hyperbox(sc.zeta(true), 0.1),
                                                     {service("up", ServiceKind::Up, horizon, 1.0)}, {}));
    const AggregationResult back = aggregation_result_from_json(nlohmann::json::parse(to_json(r).dump()));
    Activation a = Activation::zeros(r);
    a.xi[0] = Vec::Constant(horizon, 0.5);
    const Vec zeta = sc.zeta(false).row(0).transpose();
    CHECK((disaggregate(r, a, zeta).total - disaggregate(back, a, zeta).total).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(back.fingerprint == r.fingerprint);
    CHECK_THROWS_AS(aggregation_result_from_json(nlohmann::json{{"schema", "x"}}), ValidationError);
}
