#include "flexcap/aggregator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace flexcap {

namespace {

using conic::LinExpr;
using conic::VarBlock;

bool maps_nonzero(const Mat& m) { return m.size() > 0 && m.cwiseAbs().maxCoeff() > 0.0; }

// Row i of the sparse system as (column, coefficient) pairs.
std::vector<std::pair<int, double>> row_entries(const SpRowMat& w, int i) {
    std::vector<std::pair<int, double>> out;
    for (SpRowMat::InnerIterator it(w, i); it; ++it) out.emplace_back(it.col(), it.value());
    return out;
}

// sum_c coef_c * M(c, k) over a column-indexed variable matrix stored row-major (rows = columns of u).
LinExpr combine(const std::vector<std::pair<int, double>>& entries, const VarBlock& block, int width, int k,
                double scale, const std::vector<int>& position) {
    LinExpr e;
    for (const auto& [c, v] : entries) {
        const int j = position.empty() ? c : position[c];
        if (j < 0) continue;
        e.add(block[j * width + k], scale * v);
    }
    return e;
}

double power_scale(const AggregationInput& in) {
    double s = 0.0;
    for (const auto& d : in.fleet.ders) {
        if (const auto* b = std::get_if<BessSpec>(&d)) {
            s = std::max({s, std::abs(b->p_min), std::abs(b->p_max), std::abs(b->q_min), std::abs(b->q_max)});
        } else if (const auto* h = std::get_if<HpSpec>(&d)) {
            s = std::max({s, std::abs(h->p_min), std::abs(h->p_max)});
        } else if (const auto* pv = std::get_if<PvSpec>(&d)) {
            s = std::max(s, pv->mpp.cwiseAbs().maxCoeff());
        }
    }
    return s > 0.0 ? s / in.net.base_kva : 1.0;
}

}  // namespace

AggregationProblem build_problem(std::shared_ptr<const AggregationInput> input) {
    const AggregationInput& in = *input;
    in.validate();
    const int horizon = in.horizon();
    const int nd = in.num_ders();
    const int n = in.num_columns();
    const int zd = in.zeta_dim();
    const BaseloadKind mode = in.baseload.kind;

    AggregationProblem prob;
    prob.input = input;
    prob.system = assemble_constraints(in);
    prob.gcp = gcp_model(in);
    const ConstraintSystem& sys = prob.system;
    const GcpModel& gcp = prob.gcp;
    const int rows = sys.rows();
    const double base = in.net.base_kva;
    conic::ConicProgram& prog = prob.program;
    // program power unit: the largest resource rating, so that decisions are O(1)
    prob.power_scale = power_scale(in);
    const double inv = 1.0 / prob.power_scale;
    IndexMap& idx = prob.index;

    const bool uncertain = zd > 0 && (maps_nonzero(sys.mz) || maps_nonzero(gcp.mb));
    if (uncertain && in.uset.dim() != zd) {
        throw ValidationError("uncertainty maps present but the uncertainty set has dimension " +
                              std::to_string(in.uset.dim()) + " instead of " + std::to_string(zd));
    }

    // services
    LinExpr objective;
    for (const ServiceSpec& s : in.services) {
        ServiceIndex si;
        std::vector<int> position(n, -1);
        for (int t = 0; t < horizon; ++t) {
            for (int q = 0; q < 2; ++q) {
                for (int d = 0; d < nd; ++d) {
                    if (!s.eligible.empty() && !s.eligible[d]) continue;
                    const int c = in.column(t, d, q == 1);
                    position[c] = static_cast<int>(si.columns.size());
                    si.columns.push_back(c);
                }
            }
        }
        const int m = static_cast<int>(si.columns.size());
        si.e = prog.add_variable("E:" + s.name, horizon);
        si.p = prog.add_variable("P:" + s.name, m * horizon);
        si.alpha = prog.add_variable("alpha:" + s.name, rows);
        if (s.kind != ServiceKind::Symmetric) si.eps = prog.add_variable("eps:" + s.name, rows * horizon);

        for (int tau = 0; tau < horizon; ++tau) {
            objective.add(si.e[tau], s.price(tau));
            prog.add_inequality(si.e.expr(tau, -1.0), "E_nonneg:" + s.name + "[" + std::to_string(tau) + "]");
        }
        for (int tau = 0; tau < horizon; ++tau) {
            if (tau % s.block_length == 0) continue;
            const int first = tau - tau % s.block_length;
            prog.add_equality(si.e.expr(tau) - si.e.expr(first), "block:" + s.name + "[" + std::to_string(tau) + "]");
        }
        // G_t P_{:,tau} = E_tau delta_{t,tau}
        for (int t = 0; t < horizon; ++t) {
            for (int tau = 0; tau < horizon; ++tau) {
                LinExpr e;
                for (int j = 0; j < m; ++j) {
                    const double g = gcp.g(t, si.columns[j]);
                    if (g != 0.0) e.add(si.p[j * horizon + tau], g);
                }
                if (t == tau) e.add(si.e[tau], -1.0);
                if (e.is_constant()) continue;
                prog.add_equality(e, "gcp:" + s.name + "[" + std::to_string(t) + "," + std::to_string(tau) + "]");
            }
        }
        for (int k = 0; k < m * horizon; ++k) prog.add_inequality(si.p.expr(k, -1.0), "positivity:" + s.name);
        // cost-effectiveness: sum_j c_j P_{j,tau} <= g_tau E_tau
        const Vec& g = s.benefit_or_price();
        for (int tau = 0; tau < horizon; ++tau) {
            LinExpr e = si.e.expr(tau, -g(tau));
            if (s.cost.size() > 0) {
                for (int j = 0; j < m; ++j) {
                    const int c = si.columns[j];
                    const int t = c / (2 * nd);
                    const int r = c % (2 * nd);
                    if (r >= nd) continue;
                    const double cost = s.cost(r, t);
                    if (cost != 0.0) e.add(si.p[j * horizon + tau], cost);
                }
            }
            prog.add_inequality(e, "cost_effective:" + s.name + "[" + std::to_string(tau) + "]");
        }
        // row-wise worst case over the service's activation set
        for (int i = 0; i < rows; ++i) {
            const auto entries = row_entries(sys.w, i);
            const double rho = sys.storage(i) ? s.energy_factor : 1.0;
            std::vector<LinExpr> args(horizon);
            for (int tau = 0; tau < horizon; ++tau) args[tau] = combine(entries, si.p, horizon, tau, rho, position);
            const std::string label = s.name + ":" + sys.labels[i];
            if (s.kind == ServiceKind::Symmetric) {
                prog.add_soc(std::move(args), si.alpha.expr(i), "sym:" + label);
            } else {
                const double sign = s.kind == ServiceKind::Up ? 1.0 : -1.0;
                std::vector<LinExpr> eps(horizon);
                for (int tau = 0; tau < horizon; ++tau) {
                    const int k = i * horizon + tau;
                    prog.add_inequality(sign * args[tau] - si.eps.expr(k), "eps:" + label);
                    prog.add_inequality(si.eps.expr(k, -1.0), "eps_nonneg:" + label);
                    eps[tau] = si.eps.expr(k);
                }
                prog.add_soc(std::move(eps), si.alpha.expr(i), "quad:" + label);
            }
        }
        idx.services.push_back(std::move(si));
    }
    idx.n_s = static_cast<int>(in.services.size());

    // baseload
    std::vector<LinExpr> base_term(rows);  // w_i u_b at zeta = 0
    if (mode == BaseloadKind::Controlled) {
        idx.p0b = prog.add_variable("p0b", horizon);
        idx.ub = prog.add_variable("ub", n);
        for (int t = 0; t < horizon; ++t) {
            LinExpr e = idx.p0b.expr(t, -1.0);
            for (int c = 0; c < n; ++c) {
                if (gcp.g(t, c) != 0.0) e.add(idx.ub[c], gcp.g(t, c));
            }
            e.add_constant(gcp.b(t) * inv);
            prog.add_equality(e, "baseload_gcp[" + std::to_string(t) + "]");
        }
        LinExpr balance;
        LinExpr recovery;
        for (int t = 0; t < horizon; ++t) {
            balance.add(idx.p0b[t], 1.0).add_constant(-gcp.b(t) * inv);
            recovery.add(idx.p0b[t], -in.baseload.energy_cost(t) * in.dt)
                .add_constant(in.baseload.energy_cost(t) * in.dt * gcp.b(t) * inv);
        }
        prog.add_equality(balance, "baseload_energy_balance");
        if (in.baseload.wear_cost.size() > 0) {
            for (int c = 0; c < n; ++c) {
                const int t = c / (2 * nd);
                const int r = c % (2 * nd);
                if (r < nd && in.baseload.wear_cost(r, t) > 0.0) idx.abs_columns.push_back(c);
            }
            idx.ub_abs = prog.add_variable("ub_abs", static_cast<int>(idx.abs_columns.size()));
            for (int k = 0; k < idx.ub_abs.size; ++k) {
                const int c = idx.abs_columns[k];
                prog.add_inequality(idx.ub.expr(c) - idx.ub_abs.expr(k), "ub_abs_pos");
                prog.add_inequality(idx.ub.expr(c, -1.0) - idx.ub_abs.expr(k), "ub_abs_neg");
                recovery.add(idx.ub_abs[k], in.baseload.wear_cost(c % (2 * nd), c / (2 * nd)));
            }
        }
        prog.add_inequality(recovery, "baseload_cost_recovery");
        for (int i = 0; i < rows; ++i) {
            for (const auto& [c, v] : row_entries(sys.w, i)) base_term[i].add(idx.ub[c], v);
        }
    } else if (mode == BaseloadKind::SelfDispatch) {
        idx.gamma = prog.add_variable("gamma", n);
        idx.k0 = prog.add_variable("K0", n * horizon);
        idx.alpha0 = prog.add_variable("alpha0", rows);
        if (zd > 0) idx.l = prog.add_variable("L", n * zd);
        for (int t = 0; t < horizon; ++t) {
            const std::string ts = "[" + std::to_string(t) + "]";
            LinExpr e((gcp.b(t) - in.baseload.e0(t) / base) * inv);
            for (int c = 0; c < n; ++c) {
                if (gcp.g(t, c) != 0.0) e.add(idx.gamma[c], gcp.g(t, c));
            }
            prog.add_equality(e, "self_dispatch_gcp" + ts);
            for (int tau = 0; tau < horizon; ++tau) {
                LinExpr k(-in.baseload.e0_shape(t, tau) / base * inv);
                for (int c = 0; c < n; ++c) {
                    if (gcp.g(t, c) != 0.0) k.add(idx.k0[c * horizon + tau], gcp.g(t, c));
                }
                if (!k.is_constant() || k.constant() != 0.0) prog.add_equality(k, "self_dispatch_shape" + ts);
            }
            for (int z = 0; z < zd; ++z) {
                LinExpr l(gcp.mb(t, z) * inv);
                for (int c = 0; c < n; ++c) {
                    if (gcp.g(t, c) != 0.0) l.add(idx.l[c * zd + z], gcp.g(t, c));
                }
                if (!l.is_constant() || l.constant() != 0.0) prog.add_equality(l, "self_dispatch_comp" + ts);
            }
        }
        for (int i = 0; i < rows; ++i) {
            const auto entries = row_entries(sys.w, i);
            std::vector<LinExpr> args(horizon);
            for (int tau = 0; tau < horizon; ++tau) args[tau] = combine(entries, idx.k0, horizon, tau, 1.0, {});
            prog.add_soc(std::move(args), idx.alpha0.expr(i), "base:" + sys.labels[i]);
            for (const auto& [c, v] : entries) base_term[i].add(idx.gamma[c], v);
        }
        ++idx.n_s;
    }

    // uncertainty: lambda_i >= max_{zeta in U} (w_i L - Mz_i) zeta
    prob.lambda_const = Vec::Zero(rows);
    const bool recourse = mode == BaseloadKind::SelfDispatch && zd > 0;
    if (uncertain) {
        const UncertaintySet& u = in.uset;
        auto a_expr = [&](int i, const std::vector<std::pair<int, double>>& entries) {
            std::vector<LinExpr> a(zd);
            for (int z = 0; z < zd; ++z) {
                a[z] = LinExpr(-sys.mz(i, z) * inv);
                if (recourse) a[z] += combine(entries, idx.l, zd, z, 1.0, {});
            }
            return a;
        };
        if (u.kind == SetKind::Ellipsoid) {
            idx.lambda = prog.add_variable("lambda", rows);
            idx.n_u = 1;
            for (int i = 0; i < rows; ++i) {
                const auto a = a_expr(i, row_entries(sys.w, i));
                std::vector<LinExpr> args(zd);
                LinExpr bound = idx.lambda.expr(i);
                for (int k = 0; k < zd; ++k) {
                    for (int z = 0; z < zd; ++z) {
                        if (u.shape(z, k) != 0.0) args[k] += u.shape(z, k) * a[z];
                    }
                    if (u.center(k) != 0.0) bound -= u.center(k) * a[k];
                }
                prog.add_soc(std::move(args), bound, "unc:" + sys.labels[i]);
            }
        } else {
            const Vec mid = 0.5 * (u.lower + u.upper);
            const Vec half = 0.5 * (u.upper - u.lower);
            if (!recourse) {
                for (int i = 0; i < rows; ++i) {
                    const Vec a = -sys.mz.row(i).transpose();
                    prob.lambda_const(i) = a.dot(mid) + a.cwiseAbs().dot(half);
                }
            } else {
                idx.lambda = prog.add_variable("lambda", rows);
                idx.lambda_box = prog.add_variable("lambda_box", rows * zd);
                for (int i = 0; i < rows; ++i) {
                    const auto a = a_expr(i, row_entries(sys.w, i));
                    LinExpr sum = idx.lambda.expr(i, -1.0);
                    for (int z = 0; z < zd; ++z) {
                        const int k = i * zd + z;
                        prog.add_inequality(half(z) * a[z] - idx.lambda_box.expr(k), "box_pos:" + sys.labels[i]);
                        prog.add_inequality(-half(z) * a[z] - idx.lambda_box.expr(k), "box_neg:" + sys.labels[i]);
                        sum += mid(z) * a[z];
                        sum.add(idx.lambda_box[k], 1.0);
                    }
                    prog.add_inequality(sum, "box_sum:" + sys.labels[i]);
                }
            }
        }
    }

    // master rows
    for (int i = 0; i < rows; ++i) {
        LinExpr e = base_term[i];
        for (const ServiceIndex& si : idx.services) e.add(si.alpha[i], 1.0);
        if (idx.lambda.size > 0) e.add(idx.lambda[i], 1.0);
        if (idx.alpha0.size > 0) e.add(idx.alpha0[i], 1.0);
        e.add_constant((prob.lambda_const(i) - sys.z0(i)) * inv);
        prog.add_inequality(e, "row:" + sys.labels[i]);
    }

    prog.set_objective(conic::Sense::Maximize, objective);
    prog.freeze();
    spdlog::debug("aggregation program: {} variables, {} equalities, {} inequalities, {} cones",
                  prog.num_variables(), prog.num_equalities(), prog.num_inequalities(), prog.num_cones());
    return prob;
}

}  // namespace flexcap
