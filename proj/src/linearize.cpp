#include "flexcap/network.hpp"

namespace flexcap {

namespace {

struct Probe {
    double p0;
    Vec v;
    Vec i;
};

Probe probe(const NetworkDescription& net, const CMat& ybus, const CVec& s, double v_slack, const CVec& v_init,
            const PowerFlowOptions& pf) {
    const PowerFlowSolution sol = solve_power_flow(net, ybus, s, v_slack, v_init, pf);
    return {sol.export_power(), sol.v_mag(), sol.i_mag()};
}

// Fills column `col` of step `st` by central differences.
void sensitivity_column(const NetworkDescription& net, const CMat& ybus, double v_slack, const CVec& v_op,
                        const LinearizeOptions& opt, int col, LinearGridStep& st) {
    const int n = net.num_buses();
    const Complex delta = col < n ? Complex(opt.step, 0.0) : Complex(0.0, opt.step);
    CVec s = st.operating_point;
    s(col % n) += delta;
    const Probe up = probe(net, ybus, s, v_slack, v_op, opt.pf);
    s(col % n) -= 2.0 * delta;
    const Probe dn = probe(net, ybus, s, v_slack, v_op, opt.pf);
    const double inv = 1.0 / (2.0 * opt.step);
    st.g(col) = (up.p0 - dn.p0) * inv;
    st.kv.col(col) = (up.v - dn.v) * inv;
    st.ki.col(col) = (up.i - dn.i) * inv;
}

}  // namespace

LinearGridModel linearize(const NetworkDescription& net, const CMat& operating_points, double v_slack,
                          const LinearizeOptions& opt) {
    const int n = net.num_buses();
    const int nl = net.num_branches();
    const int horizon = static_cast<int>(operating_points.cols());
    if (operating_points.rows() != n) throw ValidationError("linearize: operating point has wrong bus count");
    if (!(opt.step > 0.0)) throw ValidationError("linearize: perturbation step must be positive");
    const CMat ybus = admittance_matrix(net);

    LinearGridModel model;
    model.v_slack = v_slack;
    model.steps.resize(horizon);
    std::vector<CVec> v_op(horizon);
    for (int t = 0; t < horizon; ++t) {
        LinearGridStep& st = model.steps[t];
        st.operating_point = operating_points.col(t);
        const PowerFlowSolution sol = solve_power_flow(net, ybus, st.operating_point, v_slack,
                                                       CVec::Constant(n, Complex(v_slack, 0.0)), opt.pf);
        v_op[t] = sol.v;
        st.p0 = sol.export_power();
        st.v = sol.v_mag();
        st.i = sol.i_mag();
        st.g.resize(2 * n);
        st.kv.resize(n, 2 * n);
        st.ki.resize(nl, 2 * n);
    }

    const int jobs = horizon * 2 * n;
    if (opt.exec == Exec::Serial) {
        for (int job = 0; job < jobs; ++job) {
            sensitivity_column(net, ybus, v_slack, v_op[job / (2 * n)], opt, job % (2 * n),
                               model.steps[job / (2 * n)]);
        }
    } else {
        // each job owns one column; exceptions are captured and rethrown after the loop
        std::string error;
#pragma omp parallel for schedule(dynamic, 4)
        for (int job = 0; job < jobs; ++job) {
            try {
                sensitivity_column(net, ybus, v_slack, v_op[job / (2 * n)], opt, job % (2 * n),
                                   model.steps[job / (2 * n)]);
            } catch (const std::exception& e) {
#pragma omp critical(flexcap_linearize_error)
                if (error.empty()) error = e.what();
            }
        }
        if (!error.empty()) throw SolverError("linearize: " + error);
    }
    return model;
}

}  // namespace flexcap
