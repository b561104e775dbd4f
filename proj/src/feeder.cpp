#include "flexcap/feeder.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace flexcap {

using nlohmann::json;

namespace {

Vec to_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Vec resample(const Vec& profile, int horizon) {
    const int len = static_cast<int>(profile.size());
    if (len == horizon) return profile;
    Vec out(horizon);
    if (len > 0 && len % horizon == 0) {
        const int k = len / horizon;
        for (int t = 0; t < horizon; ++t) out(t) = profile.segment(t * k, k).mean();
        return out;
    }
    if (len > 0 && horizon % len == 0) {
        const int k = horizon / len;
        for (int t = 0; t < horizon; ++t) out(t) = profile(t / k);
        return out;
    }
    throw ValidationError("profile of length " + std::to_string(len) + " cannot be resampled to " +
                          std::to_string(horizon) + " steps");
}

std::vector<Prosumer> load_prosumers(const std::string& path, const ZetaLayout& layout) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path, e.what());
    }
    if (!doc.is_array()) throw ParseError(path, "prosumer file must be a JSON array");
    std::vector<Prosumer> out;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const json& r = doc[k];
        try {
            Prosumer p;
            p.bus = r.at("bus").is_string() ? r.at("bus").get<std::string>()
                                            : std::to_string(r.at("bus").get<long long>());
            const json& load = r.at("load_kw");
            if (load.is_number()) {
                p.load_kw = Vec::Constant(layout.horizon, load.get<double>());
            } else {
                const auto v = load.get<std::vector<double>>();
                if (static_cast<int>(v.size()) != layout.horizon) {
                    throw ValidationError("load series length " + std::to_string(v.size()) + " != horizon");
                }
                p.load_kw = Eigen::Map<const Vec>(v.data(), layout.horizon);
            }
            if (r.contains("profile")) p.load_kw = p.load_kw.cwiseProduct(resample(to_vec(r.at("profile")), layout.horizon));
            p.q_ratio = r.value("q_ratio", 0.0);
            if (r.contains("uncertainty")) {
                p.driver = r.at("uncertainty").at("driver").get<std::string>();
                p.scale = r.at("uncertainty").value("scale", 1.0);
                if (layout.driver_index(p.driver) < 0) throw ValidationError("unknown driver '" + p.driver + "'");
            }
            if (!p.load_kw.allFinite()) throw ValidationError("load must be finite");
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError(path, "record " + std::to_string(k) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": record " + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

std::vector<int> FeederModel::der_buses() const {
    std::vector<int> out;
    for (const auto& d : fleet.ders) out.push_back(net.bus_index(der_bus(d)));
    return out;
}

void FeederModel::validate() const {
    net.validate();
    if (layout.horizon < 1) throw ValidationError("feeder '" + name + "': horizon must be positive");
    for (const auto& d : fleet.ders) {
        const int b = net.bus_index(der_bus(d));
        if (b == net.slack()) throw ValidationError("resource '" + der_name(d) + "' sits at the slack bus");
    }
    for (const auto& p : prosumers) {
        net.bus_index(p.bus);
        if (p.load_kw.size() != horizon()) throw ValidationError("prosumer load length != horizon");
    }
}

CMat FeederModel::nominal_injections() const {
    const int horizon = this->horizon();
    CMat s = CMat::Zero(net.num_buses(), horizon);
    for (const auto& p : prosumers) {
        const int b = net.bus_index(p.bus);
        for (int t = 0; t < horizon; ++t) s(b, t) -= Complex(p.load_kw(t), p.q_ratio * p.load_kw(t)) / net.base_kva;
    }
    for (const auto& d : fleet.ders) {
        if (const auto* pv = std::get_if<PvSpec>(&d)) {
            const int b = net.bus_index(pv->bus);
            for (int t = 0; t < horizon; ++t) s(b, t) += pv->mpp(t) / net.base_kva;
        }
    }
    return s;
}

std::vector<Mat> FeederModel::bus_zeta_maps() const {
    const int horizon = this->horizon();
    const int nb = net.num_buses();
    std::vector<Mat> out(horizon, Mat::Zero(2 * nb, layout.dim()));
    for (const auto& p : prosumers) {
        if (p.driver.empty()) continue;
        const int b = net.bus_index(p.bus);
        for (int t = 0; t < horizon; ++t) {
            const int z = layout.index(p.driver, t);
            out[t](b, z) -= p.scale / net.base_kva;
            out[t](nb + b, z) -= p.q_ratio * p.scale / net.base_kva;
        }
    }
    for (const auto& d : fleet.ders) {
        if (const auto* pv = std::get_if<PvSpec>(&d)) {
            if (pv->m_pv.size() == 0) continue;
            const int b = net.bus_index(pv->bus);
            for (int t = 0; t < horizon; ++t) out[t].row(b) += pv->m_pv.row(t) / net.base_kva;
        }
    }
    return out;
}

CMat FeederModel::injections(const Vec& u, const Vec& zeta) const {
    const int horizon = this->horizon();
    const int nd = fleet.size();
    const int nb = net.num_buses();
    if (u.size() != 2 * nd * horizon) throw ValidationError("injection vector has the wrong length");
    CMat s = nominal_injections();
    const std::vector<int> buses = der_buses();
    const bool has_zeta = zeta.size() > 0;
    if (has_zeta && zeta.size() != layout.dim()) throw ValidationError("zeta has the wrong dimension");
    const std::vector<Mat> maps = has_zeta ? bus_zeta_maps() : std::vector<Mat>{};
    for (int t = 0; t < horizon; ++t) {
        for (int d = 0; d < nd; ++d) {
            s(buses[d], t) += Complex(u(t * 2 * nd + d), u(t * 2 * nd + nd + d));
        }
        if (has_zeta) {
            const Vec dz = maps[t] * zeta;
            for (int b = 0; b < nb; ++b) s(b, t) += Complex(dz(b), dz(nb + b));
        }
    }
    return s;
}

std::shared_ptr<AggregationInput> make_input(const FeederModel& feeder, const UncertaintySet& uset,
                                             std::vector<ServiceSpec> services, BaseloadMode baseload,
                                             const InputOptions& opt) {
    feeder.validate();
    if (opt.slack_voltages.empty()) throw ValidationError("at least one slack voltage is required");
    auto in = std::make_shared<AggregationInput>();
    in->net = feeder.net;
    in->fleet = feeder.fleet;
    in->der_bus = feeder.der_buses();
    in->bus_zeta_map = feeder.bus_zeta_maps();
    in->layout = feeder.layout;
    in->uset = uset;
    in->services = std::move(services);
    in->baseload = std::move(baseload);
    in->network_rows = opt.network_rows;
    in->dt = feeder.dt;
    const CMat s = feeder.nominal_injections();
    LinearizeOptions lo;
    lo.exec = opt.exec;
    for (double v : opt.slack_voltages) in->grids.push_back(linearize(feeder.net, s, v, lo));
    in->validate();
    return in;
}

}  // namespace flexcap
