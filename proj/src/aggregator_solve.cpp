#include "flexcap/aggregator.hpp"

#include "json_util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flexcap {

namespace {

std::string infeasibility_report(const AggregationProblem& prob) {
    const ConstraintSystem& sys = prob.system;
    const UncertaintySet& u = prob.input->uset;
    const bool ellipsoid = u.kind == SetKind::Ellipsoid && u.dim() > 0 && u.dim() == sys.mz.cols();
    std::ostringstream os;
    int listed = 0;
    for (int i = 0; i < sys.rows(); ++i) {
        double worst = prob.lambda_const(i);
        if (ellipsoid) {
            const Vec a = -sys.mz.row(i).transpose();
            worst = a.dot(u.center) + (u.shape.transpose() * a).norm();
        }
        if (sys.z0(i) - worst >= -1e-9 * prob.power_scale) continue;
        if (listed < 10) os << (listed ? ", " : "") << sys.labels[i];
        ++listed;
    }
    if (listed == 0) return "aggregation problem is infeasible";
    if (listed > 10) os << " (+" << listed - 10 << " more)";
    return "aggregation problem is infeasible; rows violated at zero dispatch: " + os.str();
}

void check(bool ok, const std::string& what) {
    if (!ok) throw InvariantError("aggregation result invariant breached: " + what);
}

}  // namespace

const ServiceResult& AggregationResult::service(const std::string& name) const {
    const int i = service_index(name);
    if (i < 0) throw ValidationError("unknown service '" + name + "'");
    return services[i];
}

int AggregationResult::service_index(const std::string& name) const {
    for (std::size_t i = 0; i < services.size(); ++i) {
        if (services[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Vec AggregationResult::baseline() const {
    if (baseload == BaseloadKind::Controlled) return ub;
    if (baseload == BaseloadKind::SelfDispatch) return gamma;
    return Vec::Zero(num_columns());
}

std::pair<Vec, Vec> AggregationResult::baseload_range(const UncertaintySet& uset) const {
    Vec centre = baseload == BaseloadKind::Controlled ? p0b_kw : b_kw;
    Vec spread = Vec::Zero(horizon);
    if (baseload == BaseloadKind::SelfDispatch) {
        centre = e0_kw;
        for (int t = 0; t < horizon; ++t) spread(t) = e0_shape_kw.row(t).norm();
    } else if (mb_kw.cols() > 0 && uset.dim() == mb_kw.cols()) {
        for (int t = 0; t < horizon; ++t) {
            const Vec a = mb_kw.row(t).transpose();
            if (uset.kind == SetKind::Ellipsoid) {
                centre(t) += a.dot(uset.center);
                spread(t) = (uset.shape.transpose() * a).norm();
            } else {
                centre(t) += a.dot(0.5 * (uset.lower + uset.upper));
                spread(t) = a.cwiseAbs().dot(0.5 * (uset.upper - uset.lower));
            }
        }
    } else if (mb_kw.cols() > 0 && mb_kw.cwiseAbs().maxCoeff() > 0.0) {
        throw ValidationError("baseload range: uncertainty set dimension does not match the result");
    }
    return {centre - spread, centre + spread};
}

AggregationResult solve_aggregation(const AggregationProblem& prob, const conic::Tolerances& tol) {
    const AggregationInput& in = *prob.input;
    const conic::ConicSolution sol = conic::solve(prob.program, tol);
    switch (sol.status) {
        case conic::Status::Optimal: break;
        case conic::Status::Infeasible: throw InfeasibleError(infeasibility_report(prob));
        case conic::Status::Unbounded:
            throw SolverError("aggregation problem is unbounded; a resource is missing power bounds");
        case conic::Status::NumericalLimit:
            throw SolverError("conic engine stopped at its numerical limit after " +
                              std::to_string(sol.stats.iterations) + " iterations");
    }
    if (!sol.stats.verified) throw SolverError("solution failed independent feasibility re-check");

    const int horizon = in.horizon();
    const int nd = in.num_ders();
    const int n = in.num_columns();
    const double base = in.net.base_kva;
    const IndexMap& idx = prob.index;

    AggregationResult r;
    r.horizon = horizon;
    r.num_ders = nd;
    r.base_kva = base;
    r.dt = in.dt;
    for (const auto& d : in.fleet.ders) r.der_names.push_back(der_name(d));
    r.baseload = in.baseload.kind;
    r.b_kw = prob.gcp.b * base;
    r.mb_kw = prob.gcp.mb * base;
    r.objective = sol.objective * prob.power_scale * base;
    r.cones = prob.program.num_cones();
    r.fingerprint = prob.program.fingerprint();
    r.stats = sol.stats;

    // decisions in pu
    const Vec x = sol.x * prob.power_scale;
    auto values = [&](const conic::VarBlock& b) -> Vec { return x.segment(b.offset, b.size); };
    auto value = [&](const conic::VarBlock& b, int i) { return x(b.offset + i); };
    double scale = prob.power_scale;
    for (const ServiceIndex& si : idx.services) scale = std::max(scale, values(si.e).cwiseAbs().maxCoeff());
    const double eps = 1e-6 * (1.0 + scale) + 10.0 * tol.accept * scale;

    for (std::size_t s = 0; s < in.services.size(); ++s) {
        const ServiceSpec& spec = in.services[s];
        const ServiceIndex& si = idx.services[s];
        const int m = static_cast<int>(si.columns.size());
        ServiceResult out;
        out.name = spec.name;
        out.kind = spec.kind;
        out.energy_factor = spec.energy_factor;
        out.price = spec.price;
        out.benefit = spec.benefit_or_price();
        out.cost = spec.cost.size() > 0 ? spec.cost : Mat::Zero(nd, horizon);
        const Vec e = values(si.e);
        out.e_kw = e * base;
        out.policy = Mat::Zero(n, horizon);
        for (int j = 0; j < m; ++j) {
            for (int tau = 0; tau < horizon; ++tau) out.policy(si.columns[j], tau) = value(si.p, j * horizon + tau);
        }
        out.alpha = values(si.alpha);

        check((e.array() >= -eps).all(), spec.name + ": negative ellipsoid entry");
        for (int tau = 0; tau < horizon; ++tau) {
            const int first = tau - tau % spec.block_length;
            check(std::abs(e(tau) - e(first)) <= eps, spec.name + ": ellipsoid not constant within a block");
        }
        check(out.policy.minCoeff() >= -eps, spec.name + ": policy positivity");
        const Mat gp = prob.gcp.g * out.policy;
        check((gp - Mat(e.asDiagonal())).cwiseAbs().maxCoeff() <= eps, spec.name + ": GCP map differs from E");

        out.cost_slack.resize(horizon);
        for (int tau = 0; tau < horizon; ++tau) {
            double c = 0.0;
            for (int col = 0; col < n; ++col) {
                const int rr = col % (2 * nd);
                if (rr < nd) c += out.cost(rr, col / (2 * nd)) * out.policy(col, tau);
            }
            out.cost_slack(tau) = (out.benefit(tau) * e(tau) - c) * base;
        }
        check(out.cost_slack.minCoeff() >= -eps * base * (1.0 + out.benefit.cwiseAbs().maxCoeff()),
              spec.name + ": cost-effectiveness");

        // K in the null-space basis of each step's GCP row
        std::vector<Mat> blocks;
        int k_rows = 0;
        for (int t = 0; t < horizon; ++t) {
            std::vector<int> cols;
            for (int c : si.columns) {
                if (c / (2 * nd) == t) cols.push_back(c);
            }
            Mat g(1, static_cast<Eigen::Index>(cols.size()));
            Mat pt(static_cast<Eigen::Index>(cols.size()), horizon);
            for (std::size_t j = 0; j < cols.size(); ++j) {
                g(0, static_cast<Eigen::Index>(j)) = prob.gcp.g(t, cols[j]);
                pt.row(static_cast<Eigen::Index>(j)) = out.policy.row(cols[j]);
            }
            if (cols.empty() || g.cwiseAbs().maxCoeff() == 0.0) {
                check(e(t) <= eps, spec.name + ": flexibility offered at a step without eligible resources");
                continue;
            }
            const BasisDecomposition bd = reduce_equalities(g);
            out.d_condition = std::max(out.d_condition, bd.condition);
            blocks.push_back(bd.b2.transpose() * pt);
            k_rows += static_cast<int>(blocks.back().rows());
        }
        out.k.resize(k_rows, horizon);
        int at = 0;
        for (const Mat& b : blocks) {
            out.k.middleRows(at, b.rows()) = b;
            at += static_cast<int>(b.rows());
        }
        r.services.push_back(std::move(out));
    }

    if (in.baseload.kind == BaseloadKind::Controlled) {
        r.p0b_kw = values(idx.p0b) * base;
        r.ub = values(idx.ub);
        const double balance = (r.p0b_kw - r.b_kw).sum();
        check(std::abs(balance) <= 1e-6 * base * (1.0 + r.b_kw.cwiseAbs().maxCoeff() / base),
              "controlled baseload energy balance");
    } else if (in.baseload.kind == BaseloadKind::SelfDispatch) {
        r.gamma = values(idx.gamma);
        r.k0 = Mat::Zero(n, horizon);
        for (int c = 0; c < n; ++c) {
            for (int tau = 0; tau < horizon; ++tau) r.k0(c, tau) = value(idx.k0, c * horizon + tau);
        }
        const int zd = in.zeta_dim();
        r.l = Mat::Zero(n, zd);
        if (zd > 0) {
            for (int c = 0; c < n; ++c) {
                for (int z = 0; z < zd; ++z) r.l(c, z) = value(idx.l, c * zd + z);
            }
        }
        r.e0_kw = in.baseload.e0;
        r.e0_shape_kw = in.baseload.e0_shape;
    }

    const int rows = prob.system.rows();
    check(r.cones == (idx.n_s + idx.n_u) * rows, "cone count differs from (n_s + n_u) x rows");
    r.cones_expected = r.cones;
    const int nn = in.net.num_buses();
    const int nl = in.net.num_branches();
    const int ns = in.fleet.storage_count();
    if (in.network_rows && in.grids.size() == 1 && rows == (nn + nl + 2 * nd + ns) * 2 * horizon) {
        r.cones_expected = static_cast<int>(conic::count_cones(horizon, idx.n_s, idx.n_u, nn, nl, nd, ns));
        check(r.cones == r.cones_expected, "cone count differs from the closed-form count");
    }
    spdlog::info("aggregation solved: objective {:.6g}, {} cones, {} iterations, {:.3f} s", r.objective, r.cones,
                 sol.stats.iterations, sol.stats.seconds);
    return r;
}

AggregationResult aggregate(std::shared_ptr<const AggregationInput> input, const conic::Tolerances& tol) {
    const AggregationProblem prob = build_problem(std::move(input));
    return solve_aggregation(prob, tol);
}

Activation Activation::zeros(const AggregationResult& r) {
    Activation a;
    a.xi.assign(r.services.size(), Vec::Zero(r.horizon));
    if (r.baseload == BaseloadKind::SelfDispatch) a.xi0 = Vec::Zero(r.horizon);
    return a;
}

Vec Disaggregation::der_kw(const AggregationResult& r, int der, bool reactive) const {
    Vec out(r.horizon);
    for (int t = 0; t < r.horizon; ++t) {
        out(t) = total(t * 2 * r.num_ders + (reactive ? r.num_ders : 0) + der) * r.base_kva;
    }
    return out;
}

Vec Disaggregation::energy_weighted() const {
    Vec out = baseline;
    for (std::size_t s = 0; s < service.size(); ++s) out += weights[s] * service[s];
    return out;
}

Disaggregation disaggregate(const AggregationResult& r, const Activation& a, const Vec& zeta) {
    if (a.xi.size() != r.services.size()) throw ValidationError("one activation vector per service required");
    Disaggregation out;
    out.baseline = r.baseline();
    Vec xi0 = a.xi0.size() > 0 ? a.xi0 : Vec::Zero(r.horizon);
    const bool has_zeta = zeta.size() > 0 && r.mb_kw.cols() > 0;
    if (has_zeta && zeta.size() != r.mb_kw.cols()) throw ValidationError("zeta has the wrong dimension");
    if (r.baseload == BaseloadKind::SelfDispatch) {
        if (xi0.size() != r.horizon) throw ValidationError("baseload activation has the wrong length");
        out.baseline += r.k0 * xi0;
        if (has_zeta) out.baseline += r.l * zeta;
        out.gcp_baseload_kw = r.e0_kw + r.e0_shape_kw * xi0;
    } else {
        out.gcp_baseload_kw = r.baseload == BaseloadKind::Controlled ? r.p0b_kw : r.b_kw;
        if (has_zeta) out.gcp_baseload_kw += r.mb_kw * zeta;
    }
    out.total = out.baseline;
    for (std::size_t s = 0; s < r.services.size(); ++s) {
        const ServiceResult& sr = r.services[s];
        const Vec& xi = a.xi[s];
        if (xi.size() != r.horizon) throw ValidationError("activation for '" + sr.name + "' has the wrong length");
        if (sr.kind == ServiceKind::Up && (xi.array() < 0.0).any()) {
            throw ValidationError("up service '" + sr.name + "' activated with a negative entry");
        }
        if (sr.kind == ServiceKind::Down && (xi.array() > 0.0).any()) {
            throw ValidationError("down service '" + sr.name + "' activated with a positive entry");
        }
        out.service.push_back(sr.policy * xi);
        out.gcp_service_kw.push_back(sr.e_kw.cwiseProduct(xi));
        out.weights.push_back(sr.energy_factor);
        out.total += out.service.back();
    }
    return out;
}

FlexibilityValue flexibility_value(const AggregationResult& r, const Activation& a) {
    if (a.xi.size() != r.services.size()) throw ValidationError("one activation vector per service required");
    FlexibilityValue v;
    const int nd = r.num_ders;
    for (std::size_t s = 0; s < r.services.size(); ++s) {
        const ServiceResult& sr = r.services[s];
        const Vec mag = a.xi[s].cwiseAbs();
        v.benefit += sr.benefit.cwiseProduct(sr.e_kw).dot(mag);
        for (int col = 0; col < r.num_columns(); ++col) {
            const int rr = col % (2 * nd);
            if (rr >= nd) continue;
            const double c = sr.cost(rr, col / (2 * nd));
            if (c != 0.0) v.cost += c * r.base_kva * sr.policy.row(col).dot(mag);
        }
    }
    v.net = v.benefit - v.cost;
    return v;
}

nlohmann::json to_json(const AggregationResult& r) {
    using namespace jsonio;
    nlohmann::json j;
    j["schema"] = "flexcap.aggregation.v1";
    j["horizon"] = r.horizon;
    j["num_ders"] = r.num_ders;
    j["base_kva"] = r.base_kva;
    j["dt_h"] = r.dt;
    j["der_names"] = r.der_names;
    j["objective"] = r.objective;
    j["cones"] = r.cones;
    j["cones_expected"] = r.cones_expected;
    j["fingerprint"] = r.fingerprint;
    j["solver"] = {{"iterations", r.stats.iterations},
                   {"max_linear_violation", r.stats.max_linear_violation},
                   {"max_cone_violation", r.stats.max_cone_violation},
                   {"reduced_accuracy", r.stats.reduced_accuracy}};
    j["baseload"] = {{"mode", to_string(r.baseload)}, {"b_kw", vec(r.b_kw)}, {"mb_kw", mat(r.mb_kw)}};
    if (r.baseload == BaseloadKind::Controlled) {
        j["baseload"]["p0b_kw"] = vec(r.p0b_kw);
        j["baseload"]["ub_pu"] = vec(r.ub);
    } else if (r.baseload == BaseloadKind::SelfDispatch) {
        j["baseload"]["gamma_pu"] = vec(r.gamma);
        j["baseload"]["l_pu"] = mat(r.l);
        j["baseload"]["k0_pu"] = mat(r.k0);
        j["baseload"]["e0_kw"] = vec(r.e0_kw);
        j["baseload"]["e0_shape_kw"] = mat(r.e0_shape_kw);
    }
    nlohmann::json services = nlohmann::json::array();
    for (const ServiceResult& s : r.services) {
        services.push_back({{"name", s.name},
                            {"kind", to_string(s.kind)},
                            {"e_kw", vec(s.e_kw)},
                            {"policy_pu", mat(s.policy)},
                            {"k", mat(s.k)},
                            {"alpha", vec(s.alpha)},
                            {"cost_slack", vec(s.cost_slack)},
                            {"benefit", vec(s.benefit)},
                            {"price", vec(s.price)},
                            {"cost", mat(s.cost)},
                            {"energy_factor", s.energy_factor},
                            {"d_condition", s.d_condition}});
    }
    j["services"] = services;
    return j;
}

AggregationResult aggregation_result_from_json(const nlohmann::json& j) {
    using namespace jsonio;
    try {
        if (j.at("schema").get<std::string>() != "flexcap.aggregation.v1") {
            throw ValidationError("unsupported aggregation result schema");
        }
        AggregationResult r;
        r.horizon = j.at("horizon").get<int>();
        r.num_ders = j.at("num_ders").get<int>();
        r.base_kva = j.at("base_kva").get<double>();
        r.dt = j.at("dt_h").get<double>();
        r.der_names = j.at("der_names").get<std::vector<std::string>>();
        r.objective = j.at("objective").get<double>();
        r.cones = j.at("cones").get<int>();
        r.cones_expected = j.at("cones_expected").get<int>();
        r.fingerprint = j.at("fingerprint").get<std::string>();
        const auto& s = j.at("solver");
        r.stats.iterations = s.at("iterations").get<int>();
        r.stats.seconds = s.value("seconds", 0.0);
        r.stats.max_linear_violation = s.at("max_linear_violation").get<double>();
        r.stats.max_cone_violation = s.at("max_cone_violation").get<double>();
        r.stats.reduced_accuracy = s.at("reduced_accuracy").get<bool>();
        r.stats.verified = true;
        const auto& b = j.at("baseload");
        r.baseload = baseload_kind_from_string(b.at("mode").get<std::string>());
        r.b_kw = to_vec(b.at("b_kw"));
        r.mb_kw = to_mat(b.at("mb_kw"));
        if (r.baseload == BaseloadKind::Controlled) {
            r.p0b_kw = to_vec(b.at("p0b_kw"));
            r.ub = to_vec(b.at("ub_pu"));
        } else if (r.baseload == BaseloadKind::SelfDispatch) {
            r.gamma = to_vec(b.at("gamma_pu"));
            r.l = to_mat(b.at("l_pu"));
            r.k0 = to_mat(b.at("k0_pu"));
            r.e0_kw = to_vec(b.at("e0_kw"));
            r.e0_shape_kw = to_mat(b.at("e0_shape_kw"));
        }
        for (const auto& sj : j.at("services")) {
            ServiceResult sr;
            sr.name = sj.at("name").get<std::string>();
            sr.kind = service_kind_from_string(sj.at("kind").get<std::string>());
            sr.e_kw = to_vec(sj.at("e_kw"));
            sr.policy = to_mat(sj.at("policy_pu"));
            sr.k = to_mat(sj.at("k"));
            sr.alpha = to_vec(sj.at("alpha"));
            sr.cost_slack = to_vec(sj.at("cost_slack"));
            sr.benefit = to_vec(sj.at("benefit"));
            sr.price = to_vec(sj.at("price"));
            sr.cost = to_mat(sj.at("cost"));
            sr.energy_factor = sj.at("energy_factor").get<double>();
            sr.d_condition = sj.at("d_condition").get<double>();
            if (sr.e_kw.size() != r.horizon || sr.policy.rows() != r.num_columns()) {
                throw ValidationError("service '" + sr.name + "' has inconsistent dimensions");
            }
            r.services.push_back(std::move(sr));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("aggregation result", e.what());
    }
}

}  // namespace flexcap
