#include "flexcap/network.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

namespace flexcap {

BasisDecomposition reduce_equalities(const Mat& g, double max_condition) {
    const int m = static_cast<int>(g.rows());
    const int n = static_cast<int>(g.cols());
    if (m == 0 || m > n) throw ValidationError("reduce_equalities: G must be wide with at least one row");
    Eigen::ColPivHouseholderQR<Mat> qr(g.transpose());
    qr.setThreshold(1e-12);
    if (qr.rank() < m) {
        throw ValidationError("reduce_equalities: G is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(m) + ")");
    }
    const Mat q = qr.householderQ() * Mat::Identity(n, n);
    BasisDecomposition out;
    out.b1 = q.leftCols(m);
    out.b2 = q.rightCols(n - m);
    out.d = g * out.b1;
    const Eigen::JacobiSVD<Mat> svd(out.d);
    const Vec sv = svd.singularValues();
    out.condition = sv(0) / sv(m - 1);
    if (!(out.condition <= max_condition)) {
        throw ValidationError("reduce_equalities: cond(D) = " + std::to_string(out.condition) + " exceeds limit");
    }
    return out;
}

}  // namespace flexcap
