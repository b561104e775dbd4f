#include "flexcap/uncertainty.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flexcap {

UncertaintySet UncertaintySet::ellipsoid(Vec center, Mat shape, std::string method) {
    if (shape.rows() != center.size() || shape.cols() != center.size()) {
        throw ValidationError("ellipsoid shape must be square and match the center");
    }
    UncertaintySet s;
    s.kind = SetKind::Ellipsoid;
    s.method = std::move(method);
    s.center = std::move(center);
    s.shape = std::move(shape);
    if (s.center.size() > 0) {
        const Eigen::FullPivLU<Mat> lu(s.shape);
        if (!lu.isInvertible()) throw ValidationError("ellipsoid shape matrix is singular");
        s.shape_inv = lu.inverse();
    } else {
        s.shape_inv.resize(0, 0);
    }
    return s;
}

UncertaintySet UncertaintySet::box(Vec lower, Vec upper) {
    if (lower.size() != upper.size()) throw ValidationError("hyperbox bounds differ in dimension");
    if ((lower.array() > upper.array()).any()) throw ValidationError("hyperbox lower bound exceeds upper bound");
    UncertaintySet s;
    s.kind = SetKind::Hyperbox;
    s.method = "hyperbox";
    s.lower = std::move(lower);
    s.upper = std::move(upper);
    return s;
}

UncertaintySet UncertaintySet::none() { return ellipsoid(Vec(0), Mat(0, 0), "none"); }

double UncertaintySet::gauge(const Vec& zeta) const {
    if (zeta.size() != dim()) throw ValidationError("uncertainty set: dimension mismatch");
    if (dim() == 0) return 0.0;
    if (kind == SetKind::Ellipsoid) return (shape_inv * (zeta - center)).norm();
    double g = 0.0;
    for (int k = 0; k < dim(); ++k) {
        const double mid = 0.5 * (lower(k) + upper(k));
        const double half = 0.5 * (upper(k) - lower(k));
        const double dev = std::abs(zeta(k) - mid);
        g = std::max(g, half > 0.0 ? dev / half : (dev > 0.0 ? HUGE_VAL : 0.0));
    }
    return g;
}

bool UncertaintySet::contains(const Vec& zeta) const {
    if (zeta.size() != dim()) throw ValidationError("uncertainty set: dimension mismatch");
    if (kind == SetKind::Hyperbox) {
        return (zeta.array() >= lower.array()).all() && (zeta.array() <= upper.array()).all();
    }
    return dim() == 0 || (shape_inv * (zeta - center)).squaredNorm() <= 1.0;
}

double UncertaintySet::coverage(const Mat& rows) const {
    if (rows.rows() == 0) return 1.0;
    int inside = 0;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) inside += contains(rows.row(r).transpose());
    return static_cast<double>(inside) / static_cast<double>(rows.rows());
}

bool membership(const UncertaintySet& set, const Vec& zeta) { return set.contains(zeta); }

UncertaintySet fit_gaussian_ellipsoid(const Mat& rows, double epsilon, const GaussianOptions& opt) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("gaussian ellipsoid needs 0 < epsilon < 1");
    if (n < 2) throw ValidationError("gaussian ellipsoid needs at least two samples");
    const Vec mu = rows.colwise().mean().transpose();
    const Mat centered = rows.rowwise() - mu.transpose();
    Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success || n <= d) {
        const double ridge = 1e-8 * cov.trace() / static_cast<double>(d);
        if (!opt.ridge || !(ridge > 0.0)) {
            throw ValidationError("sample covariance is singular (" + std::to_string(n) + " samples, dimension " +
                                  std::to_string(d) + ")");
        }
        cov.diagonal().array() += ridge;
        llt.compute(cov);
        if (llt.info() != Eigen::Success) throw ValidationError("regularized covariance is not positive definite");
    }
    const boost::math::chi_squared chi2(static_cast<double>(d));
    const double radius = std::sqrt(boost::math::quantile(chi2, 1.0 - epsilon));
    UncertaintySet s = UncertaintySet::ellipsoid(mu, Mat(llt.matrixL()) * radius, "gaussian");
    s.epsilon = epsilon;
    s.achieved_coverage = s.coverage(rows);
    return s;
}

UncertaintySet coverage_ellipsoid(const Mat& rows, double epsilon, Exec exec) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ValidationError("coverage ellipsoid needs 0 <= epsilon < 1");
    if (epsilon > 0.0 && static_cast<double>(n) < 1.0 / epsilon) {
        throw ValidationError("coverage ellipsoid needs at least 1/epsilon samples");
    }
    if (n <= d) throw ValidationError("coverage ellipsoid: degenerate affine hull (too few samples)");
    const auto keep = static_cast<Eigen::Index>(std::ceil((1.0 - epsilon) * static_cast<double>(n) - 1e-9));

    // whiten with the sample covariance so neighbour distances are affine invariant
    const Vec mu = rows.colwise().mean().transpose();
    const Mat centered = rows.rowwise() - mu.transpose();
    const Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
    const Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw ValidationError("coverage ellipsoid: degenerate affine hull");
    const Mat white = llt.matrixL().solve(centered.transpose()).transpose();
    const Mat dist = pairwise_distances(white, exec);

    Eigen::Index best = 0;
    double best_radius = HUGE_VAL;
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
        std::nth_element(row.begin(), row.begin() + (keep - 1), row.end());
        if (row[static_cast<std::size_t>(keep - 1)] < best_radius) {
            best_radius = row[static_cast<std::size_t>(keep - 1)];
            best = i;
        }
    }
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dist(best, a) < dist(best, b); });
    Mat chosen(keep, d);
    for (Eigen::Index k = 0; k < keep; ++k) chosen.row(k) = rows.row(idx[static_cast<std::size_t>(k)]);

    UncertaintySet s = min_volume_ellipsoid(chosen);
    s.method = "coverage";
    s.epsilon = epsilon;
    s.achieved_coverage = s.coverage(rows);
    if (s.achieved_coverage + 1e-12 < 1.0 - epsilon) {
        throw InvariantError("coverage ellipsoid covers only " + std::to_string(s.achieved_coverage));
    }
    return s;
}

UncertaintySet hyperbox(const Mat& rows, double epsilon) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    if (n == 0) throw ValidationError("hyperbox needs at least one sample");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ValidationError("hyperbox needs 0 <= epsilon < 1");
    const auto need = static_cast<Eigen::Index>(std::ceil((1.0 - epsilon) * static_cast<double>(n) - 1e-9));

    // per-dimension order statistics
    std::vector<std::vector<double>> sorted(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) {
        auto& v = sorted[static_cast<std::size_t>(k)];
        v.assign(rows.col(k).data(), rows.col(k).data() + n);
        std::sort(v.begin(), v.end());
    }
    // lo[k], hi[k] index into sorted[k]
    std::vector<Eigen::Index> lo(static_cast<std::size_t>(d), 0);
    std::vector<Eigen::Index> hi(static_cast<std::size_t>(d), n - 1);
    auto count_inside = [&](const std::vector<Eigen::Index>& l, const std::vector<Eigen::Index>& h) {
        Eigen::Index c = 0;
        for (Eigen::Index r = 0; r < n; ++r) {
            bool in = true;
            for (Eigen::Index k = 0; k < d && in; ++k) {
                const auto& v = sorted[static_cast<std::size_t>(k)];
                in = rows(r, k) >= v[static_cast<std::size_t>(l[static_cast<std::size_t>(k)])] &&
                     rows(r, k) <= v[static_cast<std::size_t>(h[static_cast<std::size_t>(k)])];
            }
            c += in;
        }
        return c;
    };

    if (need < n) {
        // largest common symmetric trim that keeps joint coverage
        Eigen::Index a = 0;
        Eigen::Index b = (n - 1) / 2;
        while (a < b) {
            const Eigen::Index m = (a + b + 1) / 2;
            std::vector<Eigen::Index> l(static_cast<std::size_t>(d), m);
            std::vector<Eigen::Index> h(static_cast<std::size_t>(d), n - 1 - m);
            if (count_inside(l, h) >= need) {
                a = m;
            } else {
                b = m - 1;
            }
        }
        std::fill(lo.begin(), lo.end(), a);
        std::fill(hi.begin(), hi.end(), n - 1 - a);

        // greedy repair: shrink the face with the largest relative width gain while coverage holds
        std::vector<double> span(static_cast<std::size_t>(d));
        for (Eigen::Index k = 0; k < d; ++k) {
            const auto& v = sorted[static_cast<std::size_t>(k)];
            span[static_cast<std::size_t>(k)] = std::max(v.back() - v.front(), 1e-300);
        }
        while (true) {
            double best_gain = 0.0;
            Eigen::Index best_k = -1;
            bool best_upper = false;
            for (Eigen::Index k = 0; k < d; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                const auto& v = sorted[ku];
                if (lo[ku] >= hi[ku]) continue;
                for (bool upper : {false, true}) {
                    auto l = lo;
                    auto h = hi;
                    if (upper) {
                        --h[ku];
                    } else {
                        ++l[ku];
                    }
                    const double gain = upper ? v[static_cast<std::size_t>(hi[ku])] - v[static_cast<std::size_t>(h[ku])]
                                              : v[static_cast<std::size_t>(l[ku])] - v[static_cast<std::size_t>(lo[ku])];
                    const double rel = gain / span[ku];
                    if (rel > best_gain && count_inside(l, h) >= need) {
                        best_gain = rel;
                        best_k = k;
                        best_upper = upper;
                    }
                }
            }
            if (best_k < 0) break;
            if (best_upper) {
                --hi[static_cast<std::size_t>(best_k)];
            } else {
                ++lo[static_cast<std::size_t>(best_k)];
            }
        }
    }
    Vec lower(d);
    Vec upper(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        lower(k) = sorted[ku][static_cast<std::size_t>(lo[ku])];
        upper(k) = sorted[ku][static_cast<std::size_t>(hi[ku])];
    }
    UncertaintySet s = UncertaintySet::box(lower, upper);
    s.epsilon = epsilon;
    s.achieved_coverage = s.coverage(rows);
    return s;
}

Mat pairwise_distances(const Mat& rows, Exec exec) {
    const auto n = rows.rows();
    Mat out(n, n);
    auto fill_row = [&](Eigen::Index i) {
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = (rows.row(i) - rows.row(j)).norm();
    };
    if (exec == Exec::Serial) {
        for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
    } else {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
    }
    return out;
}

namespace {

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_vector(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

nlohmann::json to_json(const UncertaintySet& set) {
    nlohmann::json j;
    j["schema"] = "flexcap.uncset.v1";
    j["kind"] = set.kind == SetKind::Ellipsoid ? "ellipsoid" : "hyperbox";
    j["method"] = set.method;
    j["dim"] = set.dim();
    j["epsilon"] = set.epsilon;
    j["achieved_coverage"] = set.achieved_coverage;
    if (set.kind == SetKind::Ellipsoid) {
        j["center"] = to_vector(set.center);
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < set.shape.rows(); ++r) rows.push_back(to_vector(set.shape.row(r).transpose()));
        j["shape"] = rows;
    } else {
        j["lower"] = to_vector(set.lower);
        j["upper"] = to_vector(set.upper);
    }
    return j;
}

UncertaintySet uncertainty_set_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != "flexcap.uncset.v1") {
            throw ValidationError("unsupported uncertainty-set schema");
        }
        UncertaintySet s;
        if (j.at("kind").get<std::string>() == "ellipsoid") {
            const Vec c = from_vector(j.at("center").get<std::vector<double>>());
            Mat shape(c.size(), c.size());
            const auto& rows = j.at("shape");
            if (static_cast<Eigen::Index>(rows.size()) != c.size()) throw ValidationError("shape has wrong row count");
            for (Eigen::Index r = 0; r < c.size(); ++r) {
                const Vec row = from_vector(rows[static_cast<std::size_t>(r)].get<std::vector<double>>());
                if (row.size() != c.size()) throw ValidationError("shape has wrong column count");
                shape.row(r) = row.transpose();
            }
            s = UncertaintySet::ellipsoid(c, shape, j.value("method", "ellipsoid"));
        } else {
            s = UncertaintySet::box(from_vector(j.at("lower").get<std::vector<double>>()),
                                    from_vector(j.at("upper").get<std::vector<double>>()));
        }
        s.epsilon = j.value("epsilon", 0.0);
        s.achieved_coverage = j.value("achieved_coverage", 1.0);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("uncertainty set", e.what());
    }
}

}  // namespace flexcap
