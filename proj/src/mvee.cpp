#include "flexcap/uncertainty.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace flexcap {

namespace {

// Mahalanobis values q_i^T X^{-1} q_i for lifted points q_i = [x_i; 1].
Vec lifted_leverage(const Mat& q, const Vec& u) {
    const Mat x = q.transpose() * u.asDiagonal() * q;
    const Eigen::LLT<Mat> llt(x);
    const Mat solved = llt.solve(q.transpose());
    return (q.transpose().cwiseProduct(solved)).colwise().sum().transpose();
}

}  // namespace

UncertaintySet min_volume_ellipsoid(const Mat& rows, double tolerance) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    if (d == 0) return UncertaintySet::none();
    if (n <= d) throw ValidationError("minimum-volume ellipsoid: degenerate affine hull (too few points)");
    const Vec mean = rows.colwise().mean().transpose();
    const Mat centered = rows.rowwise() - mean.transpose();
    const Eigen::JacobiSVD<Mat> svd(centered);
    const Vec sv = svd.singularValues();
    if (!(sv(d - 1) > 1e-10 * sv(0))) {
        throw ValidationError("minimum-volume ellipsoid: points do not span the space (degenerate affine hull)");
    }

    // Khachiyan iteration with Todd-Yildirim away steps on lifted points
    Mat q(n, d + 1);
    q.leftCols(d) = centered;
    q.col(d).setOnes();
    const double dim1 = static_cast<double>(d + 1);
    Vec u = Vec::Constant(n, 1.0 / static_cast<double>(n));
    Vec m = lifted_leverage(q, u);
    Mat x_inv = (q.transpose() * u.asDiagonal() * q).inverse();
    for (int it = 0; it < 200000; ++it) {
        Eigen::Index jp = 0;
        const double m_max = m.maxCoeff(&jp);
        Eigen::Index jm = -1;
        double m_min = HUGE_VAL;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (u(i) > 0.0 && m(i) < m_min) {
                m_min = m(i);
                jm = i;
            }
        }
        const double eps_plus = m_max / dim1 - 1.0;
        const double eps_minus = 1.0 - m_min / dim1;
        if (std::max(eps_plus, eps_minus) <= tolerance) break;
        Eigen::Index j = 0;
        double beta = 0.0;
        if (eps_plus >= eps_minus) {
            j = jp;
            beta = (m_max - dim1) / (dim1 * (m_max - 1.0));
        } else {
            j = jm;
            beta = -std::min((dim1 - m_min) / (dim1 * (m_min - 1.0)), u(j) / (1.0 - u(j)));
        }
        // u <- (1 - beta) u + beta e_j, with a rank-one update of X^{-1} and the leverages
        u *= 1.0 - beta;
        u(j) += beta;
        if (u(j) < 0.0) u(j) = 0.0;
        const Vec xq = x_inv * q.row(j).transpose();
        const Vec cross = q * xq;
        const double denom = (1.0 - beta) + beta * m(j);
        x_inv = (x_inv - (beta / denom) * xq * xq.transpose()) / (1.0 - beta);
        m = (m - (beta / denom) * cross.cwiseAbs2()) / (1.0 - beta);
        if (it % 200 == 199) {
            x_inv = (q.transpose() * u.asDiagonal() * q).inverse();
            m = lifted_leverage(q, u);
        }
    }

    const Vec c = centered.transpose() * u;
    Mat cov = centered.transpose() * u.asDiagonal() * centered - c * c.transpose();
    cov *= static_cast<double>(d);  // A^{-1}
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw ValidationError("minimum-volume ellipsoid: degenerate shape");
    Mat s = llt.matrixL();
    // rescale so every point lies inside; a 1e-9 relative margin absorbs rounding on the boundary
    const Mat z = llt.matrixL().solve(centered.transpose().colwise() - c);
    const double r = std::sqrt(z.colwise().squaredNorm().maxCoeff()) * (1.0 + 1e-9);
    s *= r;
    UncertaintySet set = UncertaintySet::ellipsoid(c + mean, s, "mvee");
    set.achieved_coverage = set.coverage(rows);
    return set;
}

}  // namespace flexcap
