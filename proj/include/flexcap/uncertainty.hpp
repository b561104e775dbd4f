#pragma once

// Scenario ingestion and joint uncertainty sets over the stacked driver zeta.

#include "flexcap/common.hpp"
#include "flexcap/parallel.hpp"
#include "flexcap/zeta.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace flexcap {

struct ScenarioSet {
    ZetaLayout layout;
    Mat samples;                // N x dim, raw driver values
    std::vector<bool> in_sample;

    int size() const { return static_cast<int>(samples.rows()); }
    int dim() const { return static_cast<int>(samples.cols()); }
    Mat in_sample_rows() const;
    Mat out_of_sample_rows() const;
    // Forecast = in-sample mean; zeta rows are deviations from it.
    Vec forecast() const;
    Mat zeta(bool in) const;

    // Marks the first n_in rows in-sample and the rest out-of-sample.
    void split_first(int n_in);
    void validate() const;
};

// Header `driver_tt` columns (e.g. load_00..load_23); optional `split` (in|out) and `id` columns.
// Without a split column every row is in-sample.
ScenarioSet load_scenarios(const std::string& path);
void save_scenarios(const ScenarioSet& set, const std::string& path);

enum class SetKind { Ellipsoid, Hyperbox };

/// Ellipsoid {zeta : ||S^{-1}(zeta - center)|| <= 1} or box [lower, upper].
struct UncertaintySet {
    SetKind kind = SetKind::Ellipsoid;
    std::string method;  // gaussian | mvee | coverage | hyperbox
    Vec center;
    Mat shape;       // S
    Mat shape_inv;   // S^{-1}
    Vec lower;
    Vec upper;
    double epsilon = 0.0;
    double achieved_coverage = 1.0;  // in-sample, when fitted on samples

    int dim() const { return static_cast<int>(kind == SetKind::Ellipsoid ? center.size() : lower.size()); }
    // Exact evaluation of the defining inequality.
    bool contains(const Vec& zeta) const;
    // ||S^{-1}(zeta - c)|| for ellipsoids, max normalized box excursion for boxes (1 on the boundary).
    double gauge(const Vec& zeta) const;
    double coverage(const Mat& rows) const;

    static UncertaintySet ellipsoid(Vec center, Mat shape, std::string method);
    static UncertaintySet box(Vec lower, Vec upper);
    // Zero-dimensional set for problems without uncertainty.
    static UncertaintySet none();
};

bool membership(const UncertaintySet& set, const Vec& zeta);

struct GaussianOptions {
    bool ridge = true;  // regularize a singular covariance with 1e-8 * trace / d
};

UncertaintySet fit_gaussian_ellipsoid(const Mat& rows, double epsilon, const GaussianOptions& opt = {});
// Minimum-volume enclosing ellipsoid (Khachiyan with away steps), rescaled to contain every row.
UncertaintySet min_volume_ellipsoid(const Mat& rows, double tolerance = 1e-9);
UncertaintySet coverage_ellipsoid(const Mat& rows, double epsilon, Exec exec = Exec::Parallel);
UncertaintySet hyperbox(const Mat& rows, double epsilon);

// Euclidean distances between rows (N x N, symmetric).
Mat pairwise_distances(const Mat& rows, Exec exec = Exec::Parallel);

nlohmann::json to_json(const UncertaintySet& set);
UncertaintySet uncertainty_set_from_json(const nlohmann::json& j);

}  // namespace flexcap
