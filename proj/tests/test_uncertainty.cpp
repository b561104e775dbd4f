#include "flexcap/uncertainty.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace flexcap;

namespace {

Mat gaussian_rows(int n, const Mat& chol, const Vec& mu, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Mat out(n, mu.size());
    for (int r = 0; r < n; ++r) {
        Vec z(mu.size());
        for (int k = 0; k < mu.size(); ++k) z(k) = nd(rng);
        out.row(r) = (mu + chol * z).transpose();
    }
    return out;
}

Mat shape_gram(const UncertaintySet& s) { return s.shape * s.shape.transpose(); }

double log_volume(const UncertaintySet& s) { return std::log(std::abs(s.shape.determinant())); }

}  // namespace

TEST_CASE("scenario CSV: layout, split and malformed input") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "flexcap_scen.csv").string();
    std::ofstream(path) << "id,split,load_00,load_01,pv_00,pv_01\n0,in,1,2,3,4\n1,in,2,3,4,5\n2,out,0,1,2,3\n";
    const ScenarioSet s = load_scenarios(path);
    CHECK(s.layout.drivers == std::vector<std::string>{"load", "pv"});
    CHECK(s.layout.horizon == 2);
    CHECK(s.samples(1, 3) == 5.0);
    CHECK(s.in_sample_rows().rows() == 2);
    CHECK(s.out_of_sample_rows().rows() == 1);
    CHECK(s.forecast()(0) == 1.5);
    CHECK(s.zeta(false)(0, 0) == -1.5);

    const std::string back = (dir / "flexcap_scen_back.csv").string();
    save_scenarios(s, back);
    const ScenarioSet t = load_scenarios(back);
    CHECK(t.samples == s.samples);
    CHECK(t.in_sample == s.in_sample);

    std::ofstream(path) << "load_00,load_02\n1,2\n";
    CHECK_THROWS_AS(load_scenarios(path), ParseError);
    std::ofstream(path) << "load_00,load_01\n1,2\n3\n";
    try {
        load_scenarios(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::ofstream(path) << "load_00,load_01\n1,x\n";
    CHECK_THROWS_AS(load_scenarios(path), ParseError);
}

TEST_CASE("gaussian ellipsoid: 1-D quantile, isotropy, degeneracy") {
    const Mat one = gaussian_rows(4000, Mat::Identity(1, 1), Vec::Zero(1), 1);
    const UncertaintySet g = fit_gaussian_ellipsoid(one, 0.1);
    const double sigma = std::sqrt((one.array() - one.mean()).square().sum() / (one.rows() - 1));
    // chi-square(1) 90 % quantile 2.705543 -> radius 1.644854 sigma
    CHECK(std::abs(g.shape(0, 0)) == doctest::Approx(1.644854 * sigma).epsilon(1e-5));

    const Mat iso = gaussian_rows(20000, 2.0 * Mat::Identity(2, 2), Vec::Zero(2), 2);
    const Mat gram = shape_gram(fit_gaussian_ellipsoid(iso, 0.1));
    CHECK(std::abs(gram(0, 1)) < 0.05 * gram(0, 0));
    CHECK(gram(0, 0) == doctest::Approx(gram(1, 1)).epsilon(0.05));

    const Mat same = Mat::Ones(10, 2);
    CHECK_THROWS_AS(fit_gaussian_ellipsoid(same, 0.1), ValidationError);
    GaussianOptions no_ridge;
    no_ridge.ridge = false;
    CHECK_THROWS_AS(fit_gaussian_ellipsoid(gaussian_rows(2, Mat::Identity(3, 3), Vec::Zero(3), 3), 0.1, no_ridge),
                    ValidationError);
    // ridge fallback on a rank-deficient cloud
    Mat flat = gaussian_rows(50, Mat::Identity(2, 2), Vec::Zero(2), 4);
    flat.col(1) = flat.col(0);
    CHECK_NOTHROW(fit_gaussian_ellipsoid(flat, 0.1));
}

TEST_CASE("gaussian ellipsoid Monte Carlo coverage") {
    Mat chol(3, 3);
    chol << 1.0, 0.0, 0.0, 0.5, 2.0, 0.0, -0.3, 0.2, 0.7;
    const Mat train = gaussian_rows(5000, chol, Vec::Constant(3, 1.0), 5);
    const UncertaintySet g = fit_gaussian_ellipsoid(train, 0.1);
    const double cov = g.coverage(gaussian_rows(1000, chol, Vec::Constant(3, 1.0), 6));
    CHECK(cov >= 0.85);
    CHECK(cov <= 0.95);
}

TEST_CASE("minimum-volume ellipsoid: cross, segment, containment") {
    Mat cross(4, 2);
    cross << 1, 0, -1, 0, 0, 1, 0, -1;
    const UncertaintySet e = min_volume_ellipsoid(cross);
    CHECK(e.center.norm() < 1e-8);
    CHECK((shape_gram(e) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(e.achieved_coverage == 1.0);

    Mat seg(5, 2);
    for (int k = 0; k < 5; ++k) seg.row(k) << k, 2.0 * k;
    CHECK_THROWS_AS(min_volume_ellipsoid(seg), ValidationError);

    const Mat cloud = gaussian_rows(300, Mat::Identity(4, 4), Vec::Zero(4), 7);
    CHECK(min_volume_ellipsoid(cloud).coverage(cloud) == 1.0);
}

TEST_CASE("minimum-volume ellipsoid beats randomized containing competitors") {
    Mat chol(2, 2);
    chol << 1.0, 0.0, 0.8, 0.5;
    const Mat cloud = gaussian_rows(60, chol, Vec::Zero(2), 8);
    const UncertaintySet e = min_volume_ellipsoid(cloud);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 300; ++trial) {
        // random shape around the optimum, random center shift, then scaled to contain everything
        Mat s = e.shape;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) s(i, j) += 0.2 * nd(rng) * e.shape.norm();
        if (std::abs(s.determinant()) < 1e-9) continue;
        const Vec c = e.center + Vec{{0.2 * nd(rng), 0.2 * nd(rng)}};
        const Mat z = s.partialPivLu().solve(cloud.transpose().colwise() - c);
        const double r = std::sqrt(z.colwise().squaredNorm().maxCoeff());
        CHECK(log_volume(e) <= std::log(std::abs(s.determinant())) + 2.0 * std::log(r) + 1e-6);
    }
}

TEST_CASE("coverage ellipsoid: full coverage, counting, outlier") {
    const Mat cloud = gaussian_rows(40, Mat::Identity(2, 2), Vec::Zero(2), 10);
    const UncertaintySet all = coverage_ellipsoid(cloud, 0.0);
    const UncertaintySet mvee = min_volume_ellipsoid(cloud);
    CHECK((shape_gram(all) - shape_gram(mvee)).cwiseAbs().maxCoeff() < 1e-9);

    Mat ten = gaussian_rows(10, Mat::Identity(2, 2), Vec::Zero(2), 11);
    const UncertaintySet c = coverage_ellipsoid(ten, 0.1);
    int inside = 0;
    for (int r = 0; r < 10; ++r) inside += c.contains(ten.row(r).transpose());
    CHECK(inside >= 9);

    ten.row(9) << 40.0, -35.0;
    const UncertaintySet o = coverage_ellipsoid(ten, 0.1);
    CHECK_FALSE(o.contains(ten.row(9).transpose()));
    for (int r = 0; r < 9; ++r) CHECK(o.contains(ten.row(r).transpose()));

    CHECK_THROWS_AS(coverage_ellipsoid(ten, 0.01), ValidationError);
}

TEST_CASE("coverage sets reach the nominal in-sample coverage by count") {
    for (double eps : {0.05, 0.1, 0.2}) {
        const Mat rows = gaussian_rows(300, Mat::Identity(3, 3), Vec::Zero(3), 12);
        const int need = static_cast<int>(std::ceil((1.0 - eps) * 300 - 1e-9));
        const UncertaintySet c = coverage_ellipsoid(rows, eps);
        const UncertaintySet b = hyperbox(rows, eps);
        int in_c = 0;
        int in_b = 0;
        for (int r = 0; r < 300; ++r) {
            in_c += c.contains(rows.row(r).transpose());
            in_b += b.contains(rows.row(r).transpose());
        }
        CHECK(in_c >= need);
        CHECK(in_b >= need);
        CHECK(b.achieved_coverage == doctest::Approx(in_b / 300.0));
    }
}

TEST_CASE("hyperbox: min/max, order statistics, single sample, containment") {
    Mat two(2, 2);
    two << 0, 0, 1, 2;
    const UncertaintySet b = hyperbox(two, 0.0);
    CHECK(b.lower == Vec::Zero(2));
    CHECK(b.upper == Vec{{1.0, 2.0}});

    Mat line(10, 1);
    for (int k = 0; k < 10; ++k) line(k, 0) = k * k;
    const UncertaintySet t = hyperbox(line, 0.1);
    // dropping the widest gap end: {0,...,64} (upper tail gap 17 > lower gap 1)
    CHECK(t.lower(0) == 0.0);
    CHECK(t.upper(0) == 64.0);
    CHECK(t.achieved_coverage >= 0.9);

    Mat one(1, 3);
    one << 1, 2, 3;
    const UncertaintySet s = hyperbox(one, 0.0);
    CHECK(s.lower == s.upper);
    CHECK(s.contains(one.row(0).transpose()));

    const Mat cloud = gaussian_rows(200, Mat::Identity(4, 4), Vec::Zero(4), 13);
    const UncertaintySet full = hyperbox(cloud, 0.0);
    const UncertaintySet trimmed = hyperbox(cloud, 0.15);
    CHECK((trimmed.lower.array() >= full.lower.array()).all());
    CHECK((trimmed.upper.array() <= full.upper.array()).all());
    CHECK(full.lower == cloud.colwise().minCoeff().transpose());
}

TEST_CASE("membership boundary behaviour") {
    Mat two(2, 2);
    two << 0, 0, 1, 2;
    const UncertaintySet b = hyperbox(two, 0.0);
    CHECK(membership(b, Vec{{1.0, 2.0}}));
    CHECK_FALSE(membership(b, Vec{{1.0 + 1e-9, 2.0}}));
    CHECK_FALSE(membership(b, Vec{{0.5, -1e-9}}));
    CHECK_THROWS_AS(membership(b, Vec::Zero(3)), ValidationError);

    const Mat cloud = gaussian_rows(50, Mat::Identity(3, 3), Vec::Zero(3), 14);
    for (const UncertaintySet& e :
         {fit_gaussian_ellipsoid(cloud, 0.1), min_volume_ellipsoid(cloud), coverage_ellipsoid(cloud, 0.1)}) {
        CHECK(membership(e, e.center));
        CHECK(e.gauge(e.center + e.shape.col(0)) == doctest::Approx(1.0));
        CHECK_FALSE(membership(e, e.center + 1.001 * e.shape.col(1)));
    }
    CHECK(membership(UncertaintySet::none(), Vec(0)));
}

TEST_CASE("ellipsoid constructors are affine equivariant") {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> nd;
    const Mat cloud = gaussian_rows(120, Mat::Identity(3, 3), Vec::Zero(3), 16);
    for (int trial = 0; trial < 5; ++trial) {
        Mat a(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = nd(rng) + (i == j ? 2.0 : 0.0);
        const Vec shift{{nd(rng), nd(rng), nd(rng)}};
        const Mat mapped = (cloud * a.transpose()).rowwise() + shift.transpose();
        auto check = [&](const UncertaintySet& base, const UncertaintySet& img) {
            const Mat expect = a * shape_gram(base) * a.transpose();
            CHECK((shape_gram(img) - expect).cwiseAbs().maxCoeff() <= 1e-6 * expect.cwiseAbs().maxCoeff());
            CHECK((img.center - (a * base.center + shift)).norm() <= 1e-6 * (1.0 + img.center.norm()));
        };
        check(fit_gaussian_ellipsoid(cloud, 0.1), fit_gaussian_ellipsoid(mapped, 0.1));
        check(min_volume_ellipsoid(cloud), min_volume_ellipsoid(mapped));
        check(coverage_ellipsoid(cloud, 0.1), coverage_ellipsoid(mapped, 0.1));
    }
}

TEST_CASE("out-of-sample coverage on a 1200/400 Gaussian split") {
    Mat chol(2, 2);
    chol << 1.0, 0.0, 0.6, 0.8;
    const Mat all = gaussian_rows(1600, chol, Vec::Zero(2), 17);
    const Mat train = all.topRows(1200);
    const Mat test = all.bottomRows(400);
    for (const UncertaintySet& s : {coverage_ellipsoid(train, 0.1), hyperbox(train, 0.1)}) {
        CHECK(s.achieved_coverage >= 0.9);
        CHECK(std::abs(s.coverage(test) - 0.9) <= 0.03);
    }
}

TEST_CASE("serial and OpenMP pairwise distances agree bitwise") {
    const Mat cloud = gaussian_rows(257, Mat::Identity(5, 5), Vec::Zero(5), 18);
    const Mat a = pairwise_distances(cloud, Exec::Serial);
    const Mat b = pairwise_distances(cloud, Exec::Parallel);
    CHECK(a == b);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a(3, 7) == doctest::Approx((cloud.row(3) - cloud.row(7)).norm()));
}

TEST_CASE("uncertainty sets round-trip through JSON") {
    const Mat cloud = gaussian_rows(40, Mat::Identity(2, 2), Vec::Zero(2), 19);
    for (const UncertaintySet& s : {coverage_ellipsoid(cloud, 0.1), hyperbox(cloud, 0.1)}) {
        const UncertaintySet back = uncertainty_set_from_json(nlohmann::json::parse(to_json(s).dump()));
        CHECK(back.kind == s.kind);
        CHECK(back.coverage(cloud) == s.coverage(cloud));
        CHECK(back.achieved_coverage == s.achieved_coverage);
    }
}
