#include "flexcap/network.hpp"

#include <cmath>

namespace flexcap {

CMat admittance_matrix(const NetworkDescription& net) {
    const int n = net.num_buses();
    CMat y = CMat::Zero(n, n);
    for (const Branch& br : net.branches) {
        const Complex yl = 1.0 / br.z;
        y(br.from, br.from) += yl;
        y(br.to, br.to) += yl;
        y(br.from, br.to) -= yl;
        y(br.to, br.from) -= yl;
    }
    return y;
}

PowerFlowSolution solve_power_flow(const NetworkDescription& net, const CVec& injection, double v_slack,
                                   const PowerFlowOptions& opt) {
    const CVec flat = CVec::Constant(net.num_buses(), Complex(v_slack, 0.0));
    return solve_power_flow(net, admittance_matrix(net), injection, v_slack, flat, opt);
}

PowerFlowSolution solve_power_flow(const NetworkDescription& net, const CMat& ybus, const CVec& injection,
                                   double v_slack, const CVec& v_init, const PowerFlowOptions& opt) {
    const int n = net.num_buses();
    if (injection.size() != n) throw ValidationError("power flow: injection vector has wrong size");
    if (!(v_slack >= 0.8 && v_slack <= 1.2)) throw ValidationError("power flow: slack voltage outside [0.8, 1.2] pu");
    const int slack = net.slack();

    // PQ bus ordering for the reduced Jacobian
    std::vector<int> pq;
    pq.reserve(n - 1);
    for (int k = 0; k < n; ++k) {
        if (k != slack) pq.push_back(k);
    }
    const int m = static_cast<int>(pq.size());

    Vec va(n);
    Vec vm(n);
    for (int k = 0; k < n; ++k) {
        va(k) = std::arg(v_init(k));
        vm(k) = std::abs(v_init(k));
    }
    va(slack) = 0.0;
    vm(slack) = v_slack;

    PowerFlowSolution sol;
    CVec v(n);
    auto assemble = [&] {
        for (int k = 0; k < n; ++k) v(k) = std::polar(vm(k), va(k));
    };
    assemble();
    for (int it = 0;; ++it) {
        const CVec ibus = ybus * v;
        const CVec s = v.cwiseProduct(ibus.conjugate());
        Vec f(2 * m);
        double mis = 0.0;
        for (int a = 0; a < m; ++a) {
            const Complex d = s(pq[a]) - injection(pq[a]);
            f(a) = d.real();
            f(m + a) = d.imag();
            mis = std::max(mis, std::max(std::abs(d.real()), std::abs(d.imag())));
        }
        sol.mismatch = mis;
        sol.iterations = it;
        if (!std::isfinite(mis)) throw SolverError("power flow diverged");
        if (mis <= opt.tolerance) break;
        if (it >= opt.max_iterations) {
            throw SolverError("power flow did not converge in " + std::to_string(opt.max_iterations) +
                              " iterations (mismatch " + std::to_string(mis) + ")");
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        Mat jac(2 * m, 2 * m);
        for (int a = 0; a < m; ++a) {
            const int i = pq[a];
            for (int b = 0; b < m; ++b) {
                const int k = pq[b];
                const Complex vn = v(k) / vm(k);
                Complex dva = -Complex(0, 1) * v(i) * std::conj(ybus(i, k) * v(k));
                Complex dvm = v(i) * std::conj(ybus(i, k) * vn);
                if (i == k) {
                    dva += Complex(0, 1) * v(i) * std::conj(ibus(i));
                    dvm += std::conj(ibus(i)) * vn;
                }
                jac(a, b) = dva.real();
                jac(m + a, b) = dva.imag();
                jac(a, m + b) = dvm.real();
                jac(m + a, m + b) = dvm.imag();
            }
        }
        const Vec dx = jac.partialPivLu().solve(-f);
        if (!dx.allFinite()) throw SolverError("power flow: singular Jacobian");
        for (int a = 0; a < m; ++a) {
            va(pq[a]) += dx(a);
            vm(pq[a]) += dx(m + a);
        }
        assemble();
    }

    sol.v = v;
    sol.i.resize(net.num_branches());
    for (int l = 0; l < net.num_branches(); ++l) {
        const Branch& br = net.branches[l];
        sol.i(l) = (v(br.from) - v(br.to)) / br.z;
    }
    const Complex s_slack = v(slack) * std::conj((ybus.row(slack) * v).value());
    sol.grid_power = s_slack - injection(slack);
    return sol;
}

}  // namespace flexcap
