#pragma once

// Shared aggregation instances for the test binaries.

#include "flexcap/aggregator.hpp"
#include "flexcap/feeder.hpp"
#include "flexcap/synth.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace fixtures {

using namespace flexcap;

inline const std::string kData = FLEXCAP_DATA_DIR;

inline BessSpec battery(const std::string& name, const std::string& bus, double p, double soe_max, double soe_0,
                        double dt = 1.0) {
    BessSpec b;
    b.name = name;
    b.bus = bus;
    b.p_min = -p;
    b.p_max = p;
    b.soe_min = 0.0;
    b.soe_max = soe_max;
    b.soe_0 = soe_0;
    b.c_inv = 300.0 * soe_max;
    b.n_cycles = 5000.0;
    b.dt = dt;
    return b;
}

inline ServiceSpec service(const std::string& name, ServiceKind kind, int horizon, double price, int block = 1) {
    ServiceSpec s;
    s.name = name;
    s.kind = kind;
    s.price = Vec::Constant(horizon, price);
    s.block_length = block;
    return s;
}

// Lossless bus-power model: every active injection reaches the GCP one-to-one.
inline LinearGridModel lossless_grid(const NetworkDescription& net, int horizon) {
    LinearGridModel g;
    const int nb = net.num_buses();
    for (int t = 0; t < horizon; ++t) {
        LinearGridStep st;
        st.operating_point = CVec::Zero(nb);
        st.g = Vec::Zero(2 * nb);
        st.g.head(nb).setOnes();
        st.g(net.slack()) = 0.0;
        st.v = Vec::Ones(nb);
        st.kv = Mat::Zero(nb, 2 * nb);
        st.i = Vec::Zero(net.num_branches());
        st.ki = Mat::Zero(net.num_branches(), 2 * nb);
        g.steps.push_back(st);
    }
    return g;
}

// One battery, power 1 kW, discharge budget `budget` kWh, lossless and without grid rows.
inline std::shared_ptr<AggregationInput> analytic_input(double budget, int horizon = 2) {
    auto in = std::make_shared<AggregationInput>();
    in->net = load_network(kData + "/twobus/network.json");
    in->grids.push_back(lossless_grid(in->net, horizon));
    in->fleet.ders.emplace_back(battery("bess", "1", 1.0, 2.0 * budget, budget));
    in->der_bus = {1};
    in->layout = ZetaLayout{{}, horizon};
    in->bus_zeta_map.assign(horizon, Mat::Zero(4, 0));
    in->services.push_back(service("afrr_up", ServiceKind::Up, horizon, 1.0));
    in->network_rows = false;
    return in;
}

inline Vec daylight(int horizon, double peak) {
    Vec v(horizon);
    for (int t = 0; t < horizon; ++t) {
        const double h = 24.0 * (t + 0.5) / horizon;
        v(t) = h > 6.0 && h < 18.0 ? peak * std::sin(M_PI * (h - 6.0) / 12.0) : 0.0;
    }
    return v;
}

inline Vec load_shape(int horizon, double mean) {
    Vec v(horizon);
    for (int t = 0; t < horizon; ++t) {
        const double h = 24.0 * (t + 0.5) / horizon;
        v(t) = mean * (1.0 + 0.3 * std::sin(M_PI * (h - 9.0) / 12.0));
    }
    return v;
}

inline HpSpec heat_pump(const std::string& name, const std::string& bus, int horizon, const ZetaLayout& layout,
                        double dt) {
    HpSpec h;
    h.name = name;
    h.bus = bus;
    h.p_min = 0.0;
    h.p_max = 6.0;
    h.m_bt = 800.0;
    h.l_bt = 0.2;
    h.a_hp = 3.0;
    h.h_demand = 0.25;
    h.t_comfort = 294.15;
    h.t_min = 318.15;
    h.t_max = 338.15;
    h.t_0 = 328.15;
    h.t_env = Vec::Constant(horizon, 278.15);
    h.h_map = Mat::Zero(horizon, layout.dim());
    if (layout.driver_index("temp") >= 0) {
        for (int t = 0; t < horizon; ++t) h.h_map(t, layout.index("temp", t)) = 1.0;
    }
    h.dt = dt;
    return h;
}

// Two-bus feeder: prosumer load and PV with uncertain drivers, a battery, a heat pump and a PV unit.
inline FeederModel twobus_feeder(int horizon, bool hp = true) {
    FeederModel f;
    f.name = "twobus";
    f.net = load_network(kData + "/twobus/network.json");
    f.dt = 24.0 / horizon;
    f.layout = ZetaLayout{{"load", "pv"}, horizon};
    f.prosumers.push_back({"1", load_shape(horizon, 60.0), 0.2, "load", 8.0});
    f.fleet.ders.emplace_back(battery("bess", "1", 50.0, 200.0, 100.0, f.dt));
    PvSpec pv;
    pv.name = "pv";
    pv.bus = "1";
    pv.mpp = daylight(horizon, 40.0);
    pv.m_pv = Mat::Zero(horizon, f.layout.dim());
    for (int t = 0; t < horizon; ++t) {
        pv.m_pv(t, f.layout.index("pv", t)) = 0.1 * pv.mpp(t);
    }
    f.fleet.ders.emplace_back(pv);
    if (hp) f.fleet.ders.emplace_back(heat_pump("hp", "1", horizon, f.layout, f.dt));
    return f;
}

// 33-bus feeder with the standard loads scaled by a daily shape, three batteries, two PV plants and a heat pump.
inline FeederModel ieee33_feeder(int horizon, double ampacity_scale = 1.0) {
    FeederModel f;
    f.name = "ieee33";
    f.net = load_network(kData + "/ieee33/network.json");
    for (auto& b : f.net.branches) b.i_max *= ampacity_scale;
    f.dt = 24.0 / horizon;
    f.layout = ZetaLayout{{"load", "pv"}, horizon};
    const auto loads = load_prosumers(kData + "/ieee33/prosumers.json", f.layout);
    f.prosumers = loads;
    f.fleet.ders.emplace_back(battery("bess18", "18", 300.0, 1200.0, 600.0, f.dt));
    f.fleet.ders.emplace_back(battery("bess25", "25", 300.0, 1200.0, 600.0, f.dt));
    f.fleet.ders.emplace_back(battery("bess33", "33", 200.0, 800.0, 400.0, f.dt));
    for (const std::string bus : {"14", "30"}) {
        PvSpec pv;
        pv.name = "pv" + bus;
        pv.bus = bus;
        pv.mpp = daylight(horizon, 150.0);
        pv.m_pv = Mat::Zero(horizon, f.layout.dim());
        for (int t = 0; t < horizon; ++t) {
            pv.m_pv(t, f.layout.index("pv", t)) = 0.1 * pv.mpp(t);
        }
        f.fleet.ders.emplace_back(pv);
    }
    f.fleet.ders.emplace_back(heat_pump("hp22", "22", horizon, f.layout, f.dt));
    return f;
}

// Radial network: slack bus "0" feeding each listed bus through its own line.
inline NetworkDescription star_network(const std::vector<std::string>& buses, double v_min = 0.95,
                                       double v_max = 1.05) {
    NetworkDescription net;
    net.base_kva = 1000.0;
    net.base_kv = 0.4;
    net.buses.push_back({"0", BusType::Slack, v_min, v_max});
    for (std::size_t k = 0; k < buses.size(); ++k) {
        net.buses.push_back({buses[k], BusType::PQ, v_min, v_max});
        net.branches.push_back({"L" + buses[k], 0, static_cast<int>(k) + 1, Complex(0.01, 0.01), 1.0});
    }
    return net;
}

// Resources of a toy feeder at `bus`, scaled by `size`; names carry the bus id.
inline void add_toy_resources(FeederModel& f, const std::string& bus, double size) {
    const int horizon = f.horizon();
    f.prosumers.push_back({bus, load_shape(horizon, 60.0 * size), 0.2, "load", 8.0 * size});
    f.fleet.ders.emplace_back(battery("bess_" + bus, bus, 50.0 * size, 200.0 * size, 100.0 * size, f.dt));
    PvSpec pv;
    pv.name = "pv_" + bus;
    pv.bus = bus;
    pv.mpp = daylight(horizon, 40.0 * size);
    pv.m_pv = Mat::Zero(horizon, f.layout.dim());
    for (int t = 0; t < horizon; ++t) pv.m_pv(t, f.layout.index("pv", t)) = 0.1 * pv.mpp(t);
    f.fleet.ders.emplace_back(pv);
}

inline FeederModel toy_feeder(const std::string& bus, int horizon, double size = 1.0) {
    FeederModel f;
    f.name = "feeder_" + bus;
    f.net = star_network({bus});
    f.dt = 24.0 / horizon;
    f.layout = ZetaLayout{{"load", "pv"}, horizon};
    add_toy_resources(f, bus, size);
    return f;
}

// Both toy feeders on one network sharing the slack bus.
inline FeederModel toy_union(const std::vector<std::string>& buses, int horizon,
                             const std::vector<double>& sizes) {
    FeederModel f;
    f.name = "union";
    f.net = star_network(buses);
    f.dt = 24.0 / horizon;
    f.layout = ZetaLayout{{"load", "pv"}, horizon};
    for (std::size_t k = 0; k < buses.size(); ++k) add_toy_resources(f, buses[k], sizes[k]);
    return f;
}

inline std::vector<ServiceSpec> toy_services(int horizon, double fcr = 0.02, double up = 0.012, double down = 0.01) {
    return {service("fcr", ServiceKind::Symmetric, horizon, fcr), service("afrr_up", ServiceKind::Up, horizon, up),
            service("afrr_down", ServiceKind::Down, horizon, down)};
}

inline ScenarioSet scenarios(const ZetaLayout& layout, std::uint64_t seed, double skew = 0.0, int n = 1600,
                             int n_in = 1200) {
    SynthOptions o;
    o.samples = n;
    o.in_sample = n_in;
    o.seed = seed;
    o.skew = skew;
    return synthetic_scenarios(layout, o);
}

}  // namespace fixtures
