// Primal-dual interior-point method for linear/second-order-cone programs.
//
// Homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
// predictor-corrector, solving the reduced KKT system
//
//   [ 0   A'   G'  ]
//   [ A   0    0   ]
//   [ G   0  -W'W  ]
//
// with a sparse LDL' factorization, static regularization and iterative
// refinement. Data are Ruiz-equilibrated before the iteration starts.

#include "cone_ops.hpp"
#include "flexcap/conic.hpp"

#include <Eigen/SparseCholesky>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace flexcap::conic {

namespace {

using detail::ConeLayout;
using detail::NtScaling;

struct Equilibration {
    Vec col;    // x = col .* x_scaled
    Vec row_a;  // A_scaled = diag(row_a) A diag(col)
    Vec row_g;
    double cost = 1.0;  // c_scaled = col .* c / cost
    double rhs = 1.0;   // (b, h)_scaled = row .* (b, h) / rhs
};

Equilibration equilibrate(const StandardForm& p, const ConeLayout& k, SpMat& a, SpMat& g, Vec& b, Vec& h, Vec& c) {
    const int n = static_cast<int>(p.c.size());
    Equilibration eq;
    eq.col = Vec::Ones(n);
    eq.row_a = Vec::Ones(p.A.rows());
    eq.row_g = Vec::Ones(p.G.rows());
    a = p.A;
    g = p.G;
    for (int it = 0; it < 15; ++it) {
        Vec cn = Vec::Zero(n);
        Vec ra = Vec::Zero(a.rows());
        Vec rg = Vec::Zero(g.rows());
        for (int j = 0; j < n; ++j) {
            for (SpMat::InnerIterator i(a, j); i; ++i) {
                cn(j) = std::max(cn(j), std::abs(i.value()));
                ra(i.row()) = std::max(ra(i.row()), std::abs(i.value()));
            }
            for (SpMat::InnerIterator i(g, j); i; ++i) {
                cn(j) = std::max(cn(j), std::abs(i.value()));
                rg(i.row()) = std::max(rg(i.row()), std::abs(i.value()));
            }
        }
        // one scale per second-order cone keeps the cone invariant
        for (std::size_t q = 0; q < k.dims.size(); ++q) {
            const double m = rg.segment(k.offsets[q], k.dims[q]).maxCoeff();
            rg.segment(k.offsets[q], k.dims[q]).setConstant(m);
        }
        auto inv_sqrt = [](double v) { return v > 0.0 ? std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4) : 1.0; };
        Vec dc = cn.unaryExpr(inv_sqrt);
        Vec da = ra.unaryExpr(inv_sqrt);
        Vec dg = rg.unaryExpr(inv_sqrt);
        a = da.asDiagonal() * a * dc.asDiagonal();
        g = dg.asDiagonal() * g * dc.asDiagonal();
        eq.col = eq.col.cwiseProduct(dc);
        eq.row_a = eq.row_a.cwiseProduct(da);
        eq.row_g = eq.row_g.cwiseProduct(dg);
        const double worst = std::max({cn.size() ? (cn.array() - 1.0).abs().maxCoeff() : 0.0,
                                       ra.size() ? (ra.array() - 1.0).abs().maxCoeff() : 0.0,
                                       rg.size() ? (rg.array() - 1.0).abs().maxCoeff() : 0.0});
        if (worst < 0.1) break;
    }
    c = eq.col.cwiseProduct(p.c);
    b = eq.row_a.cwiseProduct(p.b);
    h = eq.row_g.cwiseProduct(p.h);
    eq.cost = std::max(1.0, c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0);
    const double bh = std::max(b.size() ? b.lpNorm<Eigen::Infinity>() : 0.0, h.size() ? h.lpNorm<Eigen::Infinity>() : 0.0);
    eq.rhs = std::max(1.0, bh);
    c /= eq.cost;
    b /= eq.rhs;
    h /= eq.rhs;
    return eq;
}

/// Sparse quasi-definite KKT matrix with in-place updatable scaling blocks.
class KktSystem {
public:
    KktSystem(const SpMat& a, const SpMat& g, const ConeLayout& k, double reg)
        : a_(a), g_(g), k_(k), n_(static_cast<int>(a.cols())), p_(static_cast<int>(a.rows())), reg_(reg) {
        const int m = k.total;
        const int dim = n_ + p_ + m;
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(a.nonZeros() + g.nonZeros()) + static_cast<std::size_t>(dim) * 2);
        for (int j = 0; j < n_; ++j) {
            trip.emplace_back(j, j, 1.0);
            for (SpMat::InnerIterator it(a, j); it; ++it) trip.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
            for (SpMat::InnerIterator it(g, j); it; ++it)
                trip.emplace_back(n_ + p_ + static_cast<int>(it.row()), j, it.value());
        }
        for (int i = 0; i < p_; ++i) trip.emplace_back(n_ + i, n_ + i, 1.0);
        const int zo = n_ + p_;
        for (int i = 0; i < k.linear; ++i) trip.emplace_back(zo + i, zo + i, 1.0);
        for (std::size_t q = 0; q < k.dims.size(); ++q) {
            const int o = zo + k.offsets[q];
            for (int c = 0; c < k.dims[q]; ++c)
                for (int r = c; r < k.dims[q]; ++r) trip.emplace_back(o + r, o + c, 1.0);
        }
        kkt_.resize(dim, dim);
        kkt_.setFromTriplets(trip.begin(), trip.end());
        kkt_.makeCompressed();

        for (int j = 0; j < n_ + p_; ++j) diag_slots_.push_back(slot(j, j));
        for (int i = 0; i < k.linear; ++i) lp_slots_.push_back(slot(zo + i, zo + i));
        soc_slots_.resize(k.dims.size());
        for (std::size_t q = 0; q < k.dims.size(); ++q) {
            const int o = zo + k.offsets[q];
            for (int c = 0; c < k.dims[q]; ++c)
                for (int r = c; r < k.dims[q]; ++r) soc_slots_[q].push_back(slot(o + r, o + c));
        }
        ldlt_.analyzePattern(kkt_);
    }

    // Retries with a stronger static regularization when a pivot vanishes.
    bool factor(const NtScaling& w) {
        for (double reg = reg_; reg <= reg_ * 1e6; reg *= 100.0) {
            if (factor_with(w, reg)) return true;
            spdlog::debug("KKT pivot breakdown, regularization raised to {:.1e}", reg * 100.0);
        }
        return false;
    }

    bool factor_with(const NtScaling& w, double reg) {
        double* val = kkt_.valuePtr();
        for (int j = 0; j < n_; ++j) val[diag_slots_[static_cast<std::size_t>(j)]] = reg;
        for (int i = 0; i < p_; ++i) val[diag_slots_[static_cast<std::size_t>(n_ + i)]] = -reg;
        for (int i = 0; i < k_.linear; ++i) val[lp_slots_[static_cast<std::size_t>(i)]] = -(w.lp(i) * w.lp(i)) - reg;
        for (std::size_t q = 0; q < k_.dims.size(); ++q) {
            std::size_t s = 0;
            for (int c = 0; c < k_.dims[q]; ++c)
                for (int r = c; r < k_.dims[q]; ++r) {
                    val[soc_slots_[q][s++]] = -w.w_sq[q](r, c) - (r == c ? reg : 0.0);
                }
        }
        w_ = &w;
        ldlt_.factorize(kkt_);
        return ldlt_.info() == Eigen::Success;
    }

    // Solves the unregularized system via refinement on the regularized factors.
    Vec solve(const Vec& rhs) const {
        Vec x = ldlt_.solve(rhs);
        const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
        Vec r = rhs - multiply(x);
        residual_ = r.lpNorm<Eigen::Infinity>() / scale;
        for (int it = 0; it < 20 && residual_ > 1e-14; ++it) {
            const Vec next = x + ldlt_.solve(r);
            Vec rn = rhs - multiply(next);
            const double res = rn.lpNorm<Eigen::Infinity>() / scale;
            if (!(res < 0.9 * residual_)) break;
            x = next;
            r = std::move(rn);
            residual_ = res;
        }
        return x;
    }

private:
    std::ptrdiff_t slot(int row, int col) const {
        const int* outer = kkt_.outerIndexPtr();
        const int* inner = kkt_.innerIndexPtr();
        const int* lo = inner + outer[col];
        const int* hi = inner + outer[col + 1];
        const int* it = std::lower_bound(lo, hi, row);
        return it - inner;
    }

    Vec multiply(const Vec& v) const {
        const int m = k_.total;
        Vec out(v.size());
        const auto vx = v.head(n_);
        const auto vy = v.segment(n_, p_);
        const Vec vz = v.tail(m);
        out.head(n_) = a_.transpose() * vy + g_.transpose() * vz;
        out.segment(n_, p_) = a_ * vx;
        out.tail(m) = g_ * vx - w_->apply_squared(k_, vz);
        return out;
    }

    const SpMat& a_;
    const SpMat& g_;
    const ConeLayout& k_;
    int n_;
    int p_;
    double reg_;
    SpMat kkt_;
    std::vector<std::ptrdiff_t> diag_slots_;
    std::vector<std::ptrdiff_t> lp_slots_;
    std::vector<std::vector<std::ptrdiff_t>> soc_slots_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    const NtScaling* w_ = nullptr;
    mutable double residual_ = 0.0;

public:
    double residual() const { return residual_; }
};

// Shifts u into the interior of the cone when it is not already there.
void shift_interior(const ConeLayout& k, Vec& u) {
    const double viol = detail::max_violation(k, u);
    if (viol >= -1e-8) u += (1.0 + std::max(viol, 0.0)) * detail::identity(k);
}

class InteriorPointEngine final : public Engine {
public:
    EngineResult solve(const StandardForm& problem, const Tolerances& tol) override;
};

EngineResult InteriorPointEngine::solve(const StandardForm& problem, const Tolerances& tol) {
    const ConeLayout k(problem.num_linear, problem.soc_dims);
    const int n = static_cast<int>(problem.c.size());
    const int p = static_cast<int>(problem.A.rows());
    const int m = k.total;
    EngineResult out;
    out.x = Vec::Zero(n);
    if (problem.G.rows() != m) throw SolverError("cone layout does not match G");

    SpMat a;
    SpMat g;
    Vec b;
    Vec h;
    Vec c;
    const Equilibration eq = equilibrate(problem, k, a, g, b, h, c);

    KktSystem kkt(a, g, k, 1e-9);
    NtScaling w;
    w.compute(k, detail::identity(k), detail::identity(k));
    if (!kkt.factor(w)) throw SolverError("initial KKT factorization failed");

    auto stack = [&](const Vec& r1, const Vec& r2, const Vec& r3) {
        Vec r(n + p + m);
        r << r1, r2, r3;
        return r;
    };

    // Initial point: least-squares primal and dual estimates pushed into the cone.
    Vec sol = kkt.solve(stack(Vec::Zero(n), b, h));
    Vec x = sol.head(n);
    Vec s = -sol.tail(m);
    sol = kkt.solve(stack(-c, Vec::Zero(p), Vec::Zero(m)));
    Vec y = sol.segment(n, p);
    Vec z = sol.tail(m);
    shift_interior(k, s);
    shift_interior(k, z);
    double tau = 1.0;
    double kappa = 1.0;

    const double b_norm = std::max(1.0, b.size() ? b.norm() : 0.0);
    const double h_norm = std::max(1.0, h.size() ? h.norm() : 0.0);
    const double c_norm = std::max(1.0, c.size() ? c.norm() : 0.0);
    const Vec e = detail::identity(k);
    const int degree = k.degree();

    auto finish = [&](Status st, bool reduced) {
        out.status = st;
        out.reduced_accuracy = reduced;
        out.x = eq.rhs * eq.col.cwiseProduct(x / tau);
        return out;
    };

    double best_merit = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter <= tol.max_iterations; ++iter) {
        out.iterations = iter;
        const Vec rx = a.transpose() * y + g.transpose() * z + c * tau;
        const Vec ry = a * x - b * tau;
        const Vec rz = s + g * x - h * tau;
        const double cx = c.dot(x);
        const double by = b.dot(y);
        const double hz = h.dot(z);
        const double rt = kappa + cx + by + hz;
        const double mu = (s.dot(z) + tau * kappa) / (degree + 1);

        const double pres = std::max(ry.size() ? ry.norm() / b_norm : 0.0, rz.norm() / h_norm) / tau;
        const double dres = rx.norm() / c_norm / tau;
        const double pcost = cx / tau;
        const double dcost = -(by + hz) / tau;
        const double gap = s.dot(z) / (tau * tau);
        const double relgap = gap / std::max(1e-12, std::min(std::abs(pcost), std::abs(dcost)));
        spdlog::debug("ipm it={} pcost={:.8e} dcost={:.8e} gap={:.2e} pres={:.2e} dres={:.2e} tau={:.2e} kappa={:.2e}",
                      iter, pcost, dcost, gap, pres, dres, tau, kappa);

        if (pres < tol.feasibility && dres < tol.feasibility && (gap < tol.gap || relgap < tol.gap)) {
            return finish(Status::Optimal, false);
        }
        // Certificates of infeasibility (rays of the embedding).
        auto certificate = [&](double ctol) {
            if (by + hz < -1e-12) {
                const double ray = (a.transpose() * y + g.transpose() * z).norm() / c_norm;
                if (ray / -(by + hz) < ctol) return Status::Infeasible;
            }
            if (cx < -1e-12) {
                const double ray = std::max(p ? (a * x).norm() / b_norm : 0.0, (g * x + s).norm() / h_norm);
                if (ray / -cx < ctol) return Status::Unbounded;
            }
            return Status::Optimal;
        };
        if (const Status st = certificate(tol.feasibility); st != Status::Optimal) {
            out.status = st;
            return out;
        }
        // Stalled embedding with a vanishing tau: accept a looser certificate.
        auto stalled = [&](const char* why) {
            spdlog::debug("ipm stalled at it={}: {} (tau={:.2e}, kappa={:.2e})", iter, why, tau, kappa);
            if (tau < 1e-6 * std::max(1.0, kappa)) {
                if (const Status st = certificate(1e-4); st != Status::Optimal) {
                    out.status = st;
                    return true;
                }
            }
            return false;
        };
        const bool acceptable = pres < tol.accept && dres < tol.accept && (gap < tol.accept || relgap < tol.accept);
        if (iter == tol.max_iterations) {
            if (acceptable) return finish(Status::Optimal, true);
            if (stalled("iteration limit")) return out;
            return finish(Status::NumericalLimit, false);
        }
        best_merit = std::min(best_merit, std::max({pres, dres, relgap}));

        if (!w.compute(k, s, z)) {
            if (acceptable) return finish(Status::Optimal, true);
            if (stalled("iterate left the cone")) return out;
            return finish(Status::NumericalLimit, false);
        }
        const Vec lambda = w.apply(k, z);
        if (!kkt.factor(w)) {
            if (acceptable) return finish(Status::Optimal, true);
            if (stalled("KKT factorization failed")) return out;
            return finish(Status::NumericalLimit, false);
        }

        const Vec sol1 = kkt.solve(stack(-c, b, h));
        const auto x1 = sol1.head(n);
        const auto y1 = sol1.segment(n, p);
        const auto z1 = sol1.tail(m);
        const double denom = c.dot(x1) + b.dot(y1) + h.dot(z1) - kappa / tau;

        struct Direction {
            Vec dx, dy, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        auto direction = [&](double eta, const Vec& dlambda, double dk) {
            const Vec u = detail::jordan_divide(k, lambda, dlambda);
            const Vec wu = w.apply(k, u);
            const Vec sol2 = kkt.solve(stack(-eta * rx, -eta * ry, -eta * rz - wu));
            Direction d;
            const auto x2 = sol2.head(n);
            const auto y2 = sol2.segment(n, p);
            const auto z2 = sol2.tail(m);
            d.dtau = (-eta * rt - dk / tau - c.dot(x2) - b.dot(y2) - h.dot(z2)) / denom;
            d.dx = x2 + d.dtau * x1;
            d.dy = y2 + d.dtau * y1;
            d.dz = z2 + d.dtau * z1;
            d.ds = w.apply(k, u - w.apply(k, d.dz));
            d.dkappa = (dk - kappa * d.dtau) / tau;
            return d;
        };
        auto step_length = [&](const Direction& d, double cap) {
            double alpha = std::min(detail::max_step(k, s, d.ds, cap), detail::max_step(k, z, d.dz, cap));
            if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
            if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
            return alpha;
        };

        // Predictor
        const Vec ll = detail::jordan_product(k, lambda, lambda);
        const Direction aff = direction(1.0, -ll, -tau * kappa);
        const double alpha_aff = step_length(aff, 1.0);
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        // Corrector
        const Vec corr = detail::jordan_product(k, w.apply_inverse(k, aff.ds), w.apply(k, aff.dz));
        const Direction cmb =
            direction(1.0 - sigma, -ll + sigma * mu * e - corr, -tau * kappa + sigma * mu - aff.dtau * aff.dkappa);
        const double alpha = std::min(1.0, 0.99 * step_length(cmb, 1.0 / 0.99));

        spdlog::trace("ipm step alpha_aff={:.3e} alpha={:.3e} sigma={:.2e} kkt_residual={:.2e}", alpha_aff, alpha, sigma,
                      kkt.residual());
        x += alpha * cmb.dx;
        y += alpha * cmb.dy;
        z += alpha * cmb.dz;
        s += alpha * cmb.ds;
        tau += alpha * cmb.dtau;
        kappa += alpha * cmb.dkappa;
        if (!(tau > 0.0) || !(kappa > 0.0) || !std::isfinite(x.sum())) {
            if (stalled("non-finite step")) return out;
            return finish(Status::NumericalLimit, false);
        }
    }
    return finish(Status::NumericalLimit, false);
}

}  // namespace

std::unique_ptr<Engine> make_interior_point_engine() { return std::make_unique<InteriorPointEngine>(); }

}  // namespace flexcap::conic
