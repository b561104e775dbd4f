#include "flexcap/aggregator.hpp"

#include <cmath>

namespace flexcap {

std::string to_string(ServiceKind k) {
    switch (k) {
        case ServiceKind::Symmetric: return "symmetric";
        case ServiceKind::Up: return "up";
        case ServiceKind::Down: return "down";
    }
    return "?";
}

ServiceKind service_kind_from_string(const std::string& s) {
    if (s == "symmetric") return ServiceKind::Symmetric;
    if (s == "up") return ServiceKind::Up;
    if (s == "down") return ServiceKind::Down;
    throw ValidationError("unknown service kind '" + s + "' (symmetric|up|down)");
}

std::string to_string(BaseloadKind k) {
    switch (k) {
        case BaseloadKind::Uncontrolled: return "uncontrolled";
        case BaseloadKind::Controlled: return "controlled";
        case BaseloadKind::SelfDispatch: return "self-dispatch";
    }
    return "?";
}

BaseloadKind baseload_kind_from_string(const std::string& s) {
    if (s == "uncontrolled") return BaseloadKind::Uncontrolled;
    if (s == "controlled") return BaseloadKind::Controlled;
    if (s == "self-dispatch" || s == "self_dispatch") return BaseloadKind::SelfDispatch;
    throw ValidationError("unknown baseload mode '" + s + "' (uncontrolled|controlled|self-dispatch)");
}

std::string to_string(RowCategory c) {
    switch (c) {
        case RowCategory::VoltageUpper: return "voltage_upper";
        case RowCategory::VoltageLower: return "voltage_lower";
        case RowCategory::CurrentUpper: return "current_upper";
        case RowCategory::CurrentLower: return "current_lower";
        case RowCategory::PowerBox: return "power_box";
        case RowCategory::Storage: return "storage";
    }
    return "?";
}

void ServiceSpec::validate(int horizon, int num_ders) const {
    const std::string who = "service '" + name + "': ";
    if (price.size() != horizon) throw ValidationError(who + "price series length != horizon");
    if ((price.array() < 0.0).any()) throw ValidationError(who + "prices must be nonnegative");
    if (benefit.size() != 0 && benefit.size() != horizon) throw ValidationError(who + "benefit length != horizon");
    if (block_length < 1 || horizon % block_length != 0) {
        throw ValidationError(who + "block length must divide the horizon");
    }
    if (!eligible.empty() && static_cast<int>(eligible.size()) != num_ders) {
        throw ValidationError(who + "eligibility mask length != number of resources");
    }
    if (cost.size() != 0) {
        if (cost.rows() != num_ders || cost.cols() != horizon) throw ValidationError(who + "cost matrix shape");
        if ((cost.array() < 0.0).any()) throw ValidationError(who + "costs must be nonnegative");
    }
    if (!(energy_factor >= 0.0)) throw ValidationError(who + "energy factor must be nonnegative");
}

void BaseloadMode::validate(int horizon, int num_ders) const {
    if (kind == BaseloadKind::Controlled) {
        if (energy_cost.size() != horizon) throw ValidationError("controlled baseload requires an energy cost series");
        if (wear_cost.size() != 0 && (wear_cost.rows() != num_ders || wear_cost.cols() != horizon)) {
            throw ValidationError("baseload wear cost shape");
        }
    }
    if (kind == BaseloadKind::SelfDispatch) {
        if (e0.size() != horizon || e0_shape.rows() != horizon || e0_shape.cols() != horizon) {
            throw ValidationError("self-dispatch requires e0 (T) and E0 (T x T)");
        }
        const Mat sym = 0.5 * (e0_shape + e0_shape.transpose());
        const Eigen::SelfAdjointEigenSolver<Mat> es(sym);
        if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, sym.norm())) {
            throw ValidationError("self-dispatch ellipsoid E0 must be positive semidefinite");
        }
    }
}

void AggregationInput::validate() const {
    net.validate();
    if (grids.empty()) throw ValidationError("aggregation needs a linear grid model");
    const int horizon = this->horizon();
    for (const auto& g : grids) {
        if (g.horizon() != horizon) throw ValidationError("grid models disagree on the horizon");
    }
    if (static_cast<int>(der_bus.size()) != num_ders()) throw ValidationError("resource bus map incomplete");
    for (int b : der_bus) {
        if (b < 0 || b >= net.num_buses()) throw ValidationError("resource bus index out of range");
    }
    if (static_cast<int>(bus_zeta_map.size()) != horizon) throw ValidationError("prosumption map per step missing");
    for (const Mat& m : bus_zeta_map) {
        if (m.rows() != 2 * net.num_buses() || m.cols() != zeta_dim()) {
            throw ValidationError("prosumption map has wrong shape");
        }
    }
    for (const auto& s : services) s.validate(horizon, num_ders());
    baseload.validate(horizon, num_ders());
    if (!(dt > 0.0)) throw ValidationError("time step must be positive");
}

ConstraintSystem assemble_constraints(const AggregationInput& in) {
    const int horizon = in.horizon();
    const int nd = in.num_ders();
    const int n = in.num_columns();
    const int zd = in.zeta_dim();
    const int nb = in.net.num_buses();
    ConstraintSystem sys;
    std::vector<Triplet> trip;
    std::vector<double> z0;
    std::vector<Vec> mz;

    auto push = [&](double rhs, Vec map, std::string label, RowCategory cat, int t, int der) {
        z0.push_back(rhs);
        mz.push_back(std::move(map));
        sys.labels.push_back(std::move(label));
        sys.category.push_back(cat);
        sys.time.push_back(t);
        sys.der.push_back(der);
    };

    if (in.network_rows) {
        for (std::size_t gi = 0; gi < in.grids.size(); ++gi) {
            const LinearGridModel& grid = in.grids[gi];
            const std::string tag = in.grids.size() > 1 ? "@v" + std::to_string(grid.v_slack) : "";
            for (int t = 0; t < horizon; ++t) {
                const LinearGridStep& st = grid.steps[t];
                const Mat& pz = in.bus_zeta_map[t];
                // sensitivity of a bus-space row onto the resource columns of step t
                auto emit = [&](const Eigen::Ref<const Vec>& sens, double sign, double rhs, const std::string& label,
                                RowCategory cat) {
                    const int r = static_cast<int>(z0.size());
                    for (int d = 0; d < nd; ++d) {
                        const int bus = in.der_bus[d];
                        const double cp = sign * sens(bus);
                        const double cq = sign * sens(nb + bus);
                        if (cp != 0.0) trip.emplace_back(r, in.column(t, d, false), cp);
                        if (cq != 0.0) trip.emplace_back(r, in.column(t, d, true), cq);
                    }
                    Vec map = zd > 0 ? Vec(-sign * (pz.transpose() * sens)) : Vec::Zero(0);
                    push(rhs, std::move(map), label, cat, t, -1);
                };
                for (int k = 0; k < nb; ++k) {
                    const Vec sens = st.kv.row(k).transpose();
                    const std::string id = in.net.buses[k].id;
                    const std::string ts = "[" + std::to_string(t) + "]" + tag;
                    emit(sens, 1.0, in.net.buses[k].v_max - st.v(k), "v_max:" + id + ts, RowCategory::VoltageUpper);
                    emit(sens, -1.0, st.v(k) - in.net.buses[k].v_min, "v_min:" + id + ts, RowCategory::VoltageLower);
                }
                for (int l = 0; l < in.net.num_branches(); ++l) {
                    const Vec sens = st.ki.row(l).transpose();
                    const std::string id = in.net.branches[l].id;
                    const std::string ts = "[" + std::to_string(t) + "]" + tag;
                    emit(sens, 1.0, in.net.branches[l].i_max - st.i(l), "i_max:" + id + ts,
                         RowCategory::CurrentUpper);
                    emit(sens, -1.0, in.net.branches[l].i_max + st.i(l), "i_min:" + id + ts, RowCategory::CurrentLower);
                }
            }
        }
    }

    for (int d = 0; d < nd; ++d) {
        const LinearConstraintBlock blk = der_block(in.fleet.ders[d], horizon, in.net.base_kva, zd);
        for (int r = 0; r < blk.rows(); ++r) {
            const int row = static_cast<int>(z0.size());
            for (int c = 0; c < 2 * horizon; ++c) {
                const double v = blk.w(r, c);
                if (v != 0.0) trip.emplace_back(row, in.column(c % horizon, d, c >= horizon), v);
            }
            push(blk.z0(r), zd > 0 ? Vec(blk.mz.row(r).transpose()) : Vec::Zero(0), blk.labels[r],
                 blk.kinds[r] == RowKind::Storage ? RowCategory::Storage : RowCategory::PowerBox, blk.times[r], d);
        }
    }

    const int rows = static_cast<int>(z0.size());
    sys.w.resize(rows, n);
    sys.w.setFromTriplets(trip.begin(), trip.end());
    sys.z0 = Eigen::Map<const Vec>(z0.data(), rows);
    sys.mz.resize(rows, zd);
    for (int r = 0; r < rows; ++r) {
        if (zd > 0) sys.mz.row(r) = mz[r].transpose();
    }
    return sys;
}

GcpModel gcp_model(const AggregationInput& in) {
    const int horizon = in.horizon();
    const int nb = in.net.num_buses();
    GcpModel m;
    m.g = Mat::Zero(horizon, in.num_columns());
    m.b.resize(horizon);
    m.mb = Mat::Zero(horizon, in.zeta_dim());
    for (int t = 0; t < horizon; ++t) {
        const LinearGridStep& st = in.grids[0].steps[t];
        m.b(t) = st.p0;
        for (int d = 0; d < in.num_ders(); ++d) {
            m.g(t, in.column(t, d, false)) = st.g(in.der_bus[d]);
            m.g(t, in.column(t, d, true)) = st.g(nb + in.der_bus[d]);
        }
        if (in.zeta_dim() > 0) m.mb.row(t) = (in.bus_zeta_map[t].transpose() * st.g).transpose();
    }
    return m;
}

}  // namespace flexcap
