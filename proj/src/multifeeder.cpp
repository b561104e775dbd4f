#include "flexcap/multifeeder.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

namespace flexcap {

namespace {

constexpr double kZeroFlex = 1e-6;  // kW

bool raises(ServiceKind k) { return k != ServiceKind::Down; }
bool lowers(ServiceKind k) { return k != ServiceKind::Up; }

}  // namespace

void FeederBundle::validate() const {
    if (feeders.empty()) throw ValidationError("feeder bundle is empty");
    if (!(delta >= 0.0) || delta >= 0.5) throw ValidationError("slack-voltage half range must lie in [0, 0.5)");
    if (!(transfo_export_max >= 0.0) || !(transfo_import_max >= 0.0)) {
        throw ValidationError("transformer limits must be non-negative");
    }
    std::set<std::string> names;
    const int horizon = feeders.front().model.horizon();
    for (const auto& f : feeders) {
        if (!names.insert(f.model.name).second) throw ValidationError("duplicate feeder name '" + f.model.name + "'");
        if (f.model.horizon() != horizon) throw ValidationError("feeder '" + f.model.name + "' has a different horizon");
    }
    std::set<std::string> offered;
    for (const auto& s : services) {
        if (!offered.insert(s.name).second) throw ValidationError("duplicate substation service '" + s.name + "'");
        s.validate(horizon, 0);
        for (const auto& f : feeders) {
            for (const auto& fs : f.services) {
                if (fs.name == s.name && fs.kind != s.kind) {
                    throw ValidationError("service '" + s.name + "' has a different direction in feeder '" +
                                          f.model.name + "'");
                }
            }
        }
    }
}

std::vector<double> slack_voltages(double delta) {
    if (delta > 0.0) return {1.0, 1.0 - delta, 1.0 + delta};
    return {1.0};
}

std::vector<AggregationResult> solve_feeders(const FeederBundle& bundle, Exec exec, const conic::Tolerances& tol) {
    bundle.validate();
    const int nf = static_cast<int>(bundle.feeders.size());
    std::vector<AggregationResult> out(static_cast<std::size_t>(nf));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nf));
    auto run = [&](int f) {
        const FeederCase& fc = bundle.feeders[static_cast<std::size_t>(f)];
        try {
            InputOptions opt;
            opt.slack_voltages = slack_voltages(bundle.delta);
            opt.network_rows = fc.network_rows;
            opt.exec = exec == Exec::Parallel && nf == 1 ? Exec::Parallel : Exec::Serial;
            auto in = make_input(fc.model, fc.uset, fc.services, fc.baseload, opt);
            out[static_cast<std::size_t>(f)] = aggregate(in, tol);
        } catch (...) {
            errors[static_cast<std::size_t>(f)] = std::current_exception();
        }
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int f = 0; f < nf; ++f) run(f);
    } else {
        for (int f = 0; f < nf; ++f) run(f);
    }
    for (int f = 0; f < nf; ++f) {
        if (!errors[static_cast<std::size_t>(f)]) continue;
        const std::string& name = bundle.feeders[static_cast<std::size_t>(f)].model.name;
        try {
            std::rethrow_exception(errors[static_cast<std::size_t>(f)]);
        } catch (const InfeasibleError& e) {
            throw InfeasibleError("feeder '" + name + "': " + e.what());
        } catch (const SolverError& e) {
            throw SolverError("feeder '" + name + "': " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("feeder '" + name + "': " + e.what());
        } catch (const InvariantError& e) {
            throw InvariantError("feeder '" + name + "': " + e.what());
        }
    }
    return out;
}

const CombinedService& CombinedResult::service(const std::string& name) const {
    for (const auto& s : services) {
        if (s.name == name) return s;
    }
    throw ValidationError("unknown substation service '" + name + "'");
}

std::vector<Activation> CombinedResult::feeder_activations(const Activation& a) const {
    if (a.xi.size() != services.size()) throw ValidationError("activation does not match the substation services");
    std::vector<Activation> out;
    for (std::size_t f = 0; f < feeders.size(); ++f) {
        Activation fa = Activation::zeros(feeders[f]);
        for (std::size_t s = 0; s < services.size(); ++s) {
            const int k = feeders[f].service_index(services[s].name);
            if (k < 0) continue;
            const Vec& ef = feeders[f].services[static_cast<std::size_t>(k)].e_kw;
            Vec& xf = fa.xi[static_cast<std::size_t>(k)];
            for (int t = 0; t < horizon; ++t) {
                if (ef(t) > kZeroFlex) xf(t) = services[s].split(static_cast<Eigen::Index>(f), t) / ef(t) * a.xi[s](t);
            }
        }
        out.push_back(std::move(fa));
    }
    return out;
}

CombinedResult combine_feeders(std::vector<AggregationResult> feeders, const FeederBundle& bundle,
                               const conic::Tolerances& tol) {
    bundle.validate();
    if (feeders.size() != bundle.feeders.size()) throw ValidationError("feeder results do not match the bundle");
    const int nf = static_cast<int>(feeders.size());
    const int horizon = feeders.front().horizon;

    CombinedResult c;
    c.horizon = horizon;
    c.transfo_export_max = bundle.transfo_export_max;
    c.transfo_import_max = bundle.transfo_import_max;
    c.base_min_kw = Mat::Zero(nf, horizon);
    c.base_max_kw = Mat::Zero(nf, horizon);
    double scale = 1.0;
    for (int f = 0; f < nf; ++f) {
        const auto& r = feeders[static_cast<std::size_t>(f)];
        c.feeder_names.push_back(bundle.feeders[static_cast<std::size_t>(f)].model.name);
        const auto [lo, hi] = r.baseload_range(bundle.feeders[static_cast<std::size_t>(f)].uset);
        c.base_min_kw.row(f) = lo.transpose();
        c.base_max_kw.row(f) = hi.transpose();
        for (const auto& s : r.services) scale = std::max(scale, s.e_kw.maxCoeff());
    }
    const Vec room_up = Vec::Constant(horizon, bundle.transfo_export_max) - c.base_max_kw.colwise().sum().transpose();
    const Vec room_down = Vec::Constant(horizon, bundle.transfo_import_max) + c.base_min_kw.colwise().sum().transpose();
    for (int t = 0; t < horizon; ++t) {
        if (room_up(t) < 0.0 || room_down(t) < 0.0) {
            throw InfeasibleError("baseload range exceeds the transformer rating at t=" + std::to_string(t));
        }
    }

    conic::ConicProgram prog;
    struct Blocks {
        conic::VarBlock e;
        conic::VarBlock split;
    };
    std::vector<Blocks> blocks;
    conic::LinExpr objective;
    for (const auto& spec : bundle.services) {
        Blocks b;
        b.e = prog.add_variable("E:" + spec.name, horizon);
        b.split = prog.add_variable("split:" + spec.name, nf * horizon);
        for (int t = 0; t < horizon; ++t) {
            objective += b.e.expr(t, spec.price(t));
            prog.add_inequality(b.e.expr(t, -1.0), "E_pos:" + spec.name);
            conic::LinExpr sum = b.e.expr(t, -1.0);
            for (int f = 0; f < nf; ++f) {
                const int v = f * horizon + t;
                sum += b.split.expr(v);
                prog.add_inequality(b.split.expr(v, -1.0), "split_pos:" + spec.name);
                const auto& r = feeders[static_cast<std::size_t>(f)];
                const int k = r.service_index(spec.name);
                const double ef = k < 0 ? 0.0 : r.services[static_cast<std::size_t>(k)].e_kw(t) / scale;
                const std::string label = "feeder:" + c.feeder_names[static_cast<std::size_t>(f)] + ":" + spec.name +
                                          "[" + std::to_string(t) + "]";
                if (ef > kZeroFlex / scale) {
                    prog.add_soc({b.split.expr(v)}, conic::LinExpr(ef), label);
                } else {
                    prog.add_equality(b.split.expr(v), label);
                }
            }
            prog.add_equality(sum, "balance:" + spec.name);
            if (t % spec.block_length != 0) {
                prog.add_equality(b.e.expr(t) - b.e.expr(t - 1), "block:" + spec.name);
            }
        }
        blocks.push_back(b);
    }
    for (int t = 0; t < horizon; ++t) {
        conic::LinExpr up(-room_up(t) / scale);
        conic::LinExpr down(-room_down(t) / scale);
        for (std::size_t s = 0; s < bundle.services.size(); ++s) {
            if (raises(bundle.services[s].kind)) up += blocks[s].e.expr(t);
            if (lowers(bundle.services[s].kind)) down += blocks[s].e.expr(t);
        }
        if (std::isfinite(room_up(t)) && room_up(t) < 1e299) prog.add_inequality(up, "transfo_export[" + std::to_string(t) + "]");
        if (std::isfinite(room_down(t)) && room_down(t) < 1e299) prog.add_inequality(down, "transfo_import[" + std::to_string(t) + "]");
    }
    prog.set_objective(conic::Sense::Maximize, objective);
    prog.freeze();
    c.cones = prog.num_cones();

    const conic::ConicSolution sol = conic::solve(prog, tol);
    switch (sol.status) {
        case conic::Status::Optimal: break;
        case conic::Status::Infeasible: throw InfeasibleError("feeder combination is infeasible");
        case conic::Status::Unbounded: throw SolverError("feeder combination is unbounded");
        case conic::Status::NumericalLimit: throw SolverError("feeder combination stopped at its numerical limit");
    }
    if (!sol.stats.verified) throw SolverError("feeder combination failed independent feasibility re-check");
    c.stats = sol.stats;
    c.objective = sol.objective * scale;

    for (std::size_t s = 0; s < bundle.services.size(); ++s) {
        CombinedService cs;
        cs.name = bundle.services[s].name;
        cs.kind = bundle.services[s].kind;
        cs.price = bundle.services[s].price;
        cs.e_kw = (sol.values(blocks[s].e) * scale).cwiseMax(0.0);
        cs.split = Mat::Zero(nf, horizon);
        for (int f = 0; f < nf; ++f) {
            for (int t = 0; t < horizon; ++t) {
                cs.split(f, t) = std::max(0.0, sol.value(blocks[s].split, f * horizon + t) * scale);
            }
        }
        c.services.push_back(std::move(cs));
    }

    // Solver slack may leave split a hair above E_f; clamp, then restore the balance and block shape by
    // shrinking E, which only loosens the transformer rows.
    c.objective = 0.0;
    for (std::size_t s = 0; s < c.services.size(); ++s) {
        CombinedService& cs = c.services[s];
        for (int f = 0; f < nf; ++f) {
            const auto& r = feeders[static_cast<std::size_t>(f)];
            const int k = r.service_index(cs.name);
            for (int t = 0; t < horizon; ++t) {
                const double ef = k < 0 ? 0.0 : r.services[static_cast<std::size_t>(k)].e_kw(t);
                cs.split(f, t) = ef > kZeroFlex ? std::min(cs.split(f, t), ef) : 0.0;
            }
        }
        const Vec total = cs.split.colwise().sum().transpose();
        const int block = bundle.services[s].block_length;
        for (int t0 = 0; t0 < horizon; t0 += block) {
            const double e = std::min(cs.e_kw.segment(t0, block).minCoeff(), total.segment(t0, block).minCoeff());
            for (int t = t0; t < t0 + block; ++t) {
                cs.split.col(t) *= total(t) > 0.0 ? e / total(t) : 0.0;
                cs.e_kw(t) = e;
            }
        }
        c.objective += cs.price.dot(cs.e_kw);
    }
    c.feeders = std::move(feeders);

    // Containment of every substation activation in each feeder ball.
    for (const auto& cs : c.services) {
        for (int f = 0; f < nf; ++f) {
            const auto& r = c.feeders[static_cast<std::size_t>(f)];
            const int k = r.service_index(cs.name);
            for (int t = 0; t < horizon; ++t) {
                const double ef = k < 0 ? 0.0 : r.services[static_cast<std::size_t>(k)].e_kw(t);
                const double ratio = ef > kZeroFlex ? cs.split(f, t) / ef : cs.split(f, t);
                if (ratio > 1.0 + 1e-6 && cs.split(f, t) > kZeroFlex) {
                    throw InvariantError("split of '" + cs.name + "' exceeds feeder '" + c.feeder_names[f] + "' at t=" +
                                         std::to_string(t));
                }
            }
        }
    }
    spdlog::info("feeder combination solved: objective {:.6g}, {} feeders, {} cones", c.objective, nf, c.cones);
    return c;
}

ChainDisaggregation disaggregate_chain(const CombinedResult& c, const Activation& a, const std::vector<Vec>& zeta) {
    if (zeta.size() != c.feeders.size()) throw ValidationError("one zeta realization per feeder is required");
    for (std::size_t s = 0; s < c.services.size(); ++s) {
        if (a.xi[s].size() != c.horizon) throw ValidationError("activation length does not match the horizon");
        if (a.xi[s].norm() > 1.0 + 1e-8) throw ValidationError("substation activation outside the unit ball");
    }
    ChainDisaggregation out;
    out.feeder_activation = c.feeder_activations(a);
    out.transformer_kw = Vec::Zero(c.horizon);
    for (std::size_t f = 0; f < c.feeders.size(); ++f) {
        for (std::size_t k = 0; k < out.feeder_activation[f].xi.size(); ++k) {
            const double n = out.feeder_activation[f].xi[k].norm();
            if (n > 1.0 + 1e-8) {
                throw InvariantError("feeder '" + c.feeder_names[f] + "' activation of '" + c.feeders[f].services[k].name +
                                     "' leaves its ellipsoid (norm " + std::to_string(n) + ")");
            }
        }
        Disaggregation d = disaggregate(c.feeders[f], out.feeder_activation[f], zeta[f]);
        out.transformer_kw += d.gcp_baseload_kw;
        for (const auto& g : d.gcp_service_kw) out.transformer_kw += g;
        out.feeder.push_back(std::move(d));
    }
    return out;
}

nlohmann::json to_json(const CombinedResult& c) {
    using nlohmann::json;
    json j;
    j["schema"] = "flexcap.combined.v1";
    j["horizon"] = c.horizon;
    j["objective"] = c.objective;
    j["cones"] = c.cones;
    j["transformer"] = {{"export_max_kw", c.transfo_export_max}, {"import_max_kw", c.transfo_import_max}};
    json services = json::array();
    for (const auto& s : c.services) {
        json split = json::object();
        for (std::size_t f = 0; f < c.feeder_names.size(); ++f) {
            const Vec row = s.split.row(static_cast<Eigen::Index>(f)).transpose();
            split[c.feeder_names[f]] = std::vector<double>(row.data(), row.data() + row.size());
        }
        services.push_back({{"name", s.name},
                            {"kind", to_string(s.kind)},
                            {"price", std::vector<double>(s.price.data(), s.price.data() + s.price.size())},
                            {"e_kw", std::vector<double>(s.e_kw.data(), s.e_kw.data() + s.e_kw.size())},
                            {"split_kw", split}});
    }
    j["services"] = services;
    json feeders = json::array();
    for (std::size_t f = 0; f < c.feeders.size(); ++f) {
        const Vec lo = c.base_min_kw.row(static_cast<Eigen::Index>(f)).transpose();
        const Vec hi = c.base_max_kw.row(static_cast<Eigen::Index>(f)).transpose();
        feeders.push_back({{"name", c.feeder_names[f]},
                           {"baseload_min_kw", std::vector<double>(lo.data(), lo.data() + lo.size())},
                           {"baseload_max_kw", std::vector<double>(hi.data(), hi.data() + hi.size())},
                           {"result", to_json(c.feeders[f])}});
    }
    j["feeders"] = feeders;
    return j;
}

}  // namespace flexcap
