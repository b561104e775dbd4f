#include "cone_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flexcap::conic::detail {

ConeLayout::ConeLayout(int l, std::vector<int> soc_dims) : linear(l), dims(std::move(soc_dims)) {
    int off = linear;
    offsets.reserve(dims.size());
    for (int d : dims) {
        offsets.push_back(off);
        off += d;
    }
    total = off;
}

Vec identity(const ConeLayout& k) {
    Vec e = Vec::Zero(k.total);
    e.head(k.linear).setOnes();
    for (int off : k.offsets) e(off) = 1.0;
    return e;
}

Vec jordan_product(const ConeLayout& k, const Vec& u, const Vec& v) {
    Vec w(k.total);
    w.head(k.linear) = u.head(k.linear).cwiseProduct(v.head(k.linear));
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        const int o = k.offsets[c];
        const int d = k.dims[c];
        w(o) = u.segment(o, d).dot(v.segment(o, d));
        w.segment(o + 1, d - 1) = u(o) * v.segment(o + 1, d - 1) + v(o) * u.segment(o + 1, d - 1);
    }
    return w;
}

Vec jordan_divide(const ConeLayout& k, const Vec& lambda, const Vec& d) {
    Vec x(k.total);
    x.head(k.linear) = d.head(k.linear).cwiseQuotient(lambda.head(k.linear));
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        const int o = k.offsets[c];
        const int n = k.dims[c] - 1;
        const double l0 = lambda(o);
        const auto l1 = lambda.segment(o + 1, n);
        const double det = l0 * l0 - l1.squaredNorm();
        const double x0 = (l0 * d(o) - l1.dot(d.segment(o + 1, n))) / det;
        x(o) = x0;
        x.segment(o + 1, n) = (d.segment(o + 1, n) - x0 * l1) / l0;
    }
    return x;
}

double max_violation(const ConeLayout& k, const Vec& u) {
    double v = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k.linear; ++i) v = std::max(v, -u(i));
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        const int o = k.offsets[c];
        v = std::max(v, u.segment(o + 1, k.dims[c] - 1).norm() - u(o));
    }
    return v;
}

namespace {

double soc_step(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& dx) {
    const int n = static_cast<int>(x.size()) - 1;
    const double a = dx(0) * dx(0) - dx.tail(n).squaredNorm();
    const double b = x(0) * dx(0) - x.tail(n).dot(dx.tail(n));
    const double c = std::max(x(0) * x(0) - x.tail(n).squaredNorm(), 0.0);
    const double inf = std::numeric_limits<double>::infinity();
    // f(t) = a t^2 + 2 b t + c, f(0) = c > 0; return the first positive root.
    if (std::abs(a) < 1e-300) {
        return b >= 0.0 ? inf : -c / (2.0 * b);
    }
    const double disc = b * b - a * c;
    if (a < 0.0) {
        // roots of opposite sign; take the positive one without cancellation
        const double sq = std::sqrt(std::max(disc, 0.0));
        return b > 0.0 ? (-b - sq) / a : c / (-b + sq);
    }
    if (disc < 0.0 || b >= 0.0) return inf;
    // both roots positive; the smaller one
    return c / (-b + std::sqrt(disc));
}

}  // namespace

double max_step(const ConeLayout& k, const Vec& x, const Vec& dx, double cap) {
    double step = cap;
    for (int i = 0; i < k.linear; ++i) {
        if (dx(i) < 0.0) step = std::min(step, -x(i) / dx(i));
    }
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        const int o = k.offsets[c];
        step = std::min(step, soc_step(x.segment(o, k.dims[c]), dx.segment(o, k.dims[c])));
    }
    return std::max(step, 0.0);
}

bool NtScaling::compute(const ConeLayout& k, const Vec& s, const Vec& z) {
    lp = Vec(k.linear);
    for (int i = 0; i < k.linear; ++i) {
        if (s(i) <= 0.0 || z(i) <= 0.0) return false;
        lp(i) = std::sqrt(s(i) / z(i));
    }
    w.resize(k.dims.size());
    w_inv.resize(k.dims.size());
    w_sq.resize(k.dims.size());
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        const int o = k.offsets[c];
        const int d = k.dims[c];
        const int n = d - 1;
        const double s1 = s.segment(o + 1, n).norm();
        const double z1 = z.segment(o + 1, n).norm();
        const double s_res = (s(o) - s1) * (s(o) + s1);
        const double z_res = (z(o) - z1) * (z(o) + z1);
        if (s(o) <= 0.0 || z(o) <= 0.0 || s_res <= 0.0 || z_res <= 0.0) return false;
        const double s_norm = std::sqrt(s_res);
        const double z_norm = std::sqrt(z_res);
        const Vec sb = s.segment(o, d) / s_norm;
        const Vec zb = z.segment(o, d) / z_norm;
        const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
        Vec wb(d);
        wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
        wb.tail(n) = (sb.tail(n) - zb.tail(n)) / (2.0 * gamma);
        const double beta = std::sqrt(s_norm / z_norm);
        Vec v = wb;
        v(0) += 1.0;
        v /= std::sqrt(2.0 * (wb(0) + 1.0));
        Mat J = Mat::Identity(d, d);
        J.bottomRightCorner(n, n) *= -1.0;
        const Mat vvt = 2.0 * v * v.transpose();
        w[c] = beta * (vvt - J);
        const Vec jv = J * v;
        w_inv[c] = (2.0 * jv * jv.transpose() - J) / beta;
        w_sq[c] = w[c] * w[c];
    }
    return true;
}

Vec NtScaling::apply(const ConeLayout& k, const Vec& v) const {
    Vec out(k.total);
    out.head(k.linear) = lp.cwiseProduct(v.head(k.linear));
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        out.segment(k.offsets[c], k.dims[c]).noalias() = w[c] * v.segment(k.offsets[c], k.dims[c]);
    }
    return out;
}

Vec NtScaling::apply_inverse(const ConeLayout& k, const Vec& v) const {
    Vec out(k.total);
    out.head(k.linear) = v.head(k.linear).cwiseQuotient(lp);
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        out.segment(k.offsets[c], k.dims[c]).noalias() = w_inv[c] * v.segment(k.offsets[c], k.dims[c]);
    }
    return out;
}

Vec NtScaling::apply_squared(const ConeLayout& k, const Vec& v) const {
    Vec out(k.total);
    out.head(k.linear) = lp.cwiseAbs2().cwiseProduct(v.head(k.linear));
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
        out.segment(k.offsets[c], k.dims[c]).noalias() = w_sq[c] * v.segment(k.offsets[c], k.dims[c]);
    }
    return out;
}

}  // namespace flexcap::conic::detail
