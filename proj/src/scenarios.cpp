#include "flexcap/uncertainty.hpp"

#include "csv.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <iomanip>
#include <map>

namespace flexcap {

namespace {

Mat select_rows(const Mat& m, const std::vector<bool>& mask, bool value) {
    int n = 0;
    for (bool b : mask) n += b == value;
    Mat out(n, m.cols());
    int r = 0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (mask[k] == value) out.row(r++) = m.row(static_cast<Eigen::Index>(k));
    }
    return out;
}

}  // namespace

Mat ScenarioSet::in_sample_rows() const { return select_rows(samples, in_sample, true); }
Mat ScenarioSet::out_of_sample_rows() const { return select_rows(samples, in_sample, false); }

Vec ScenarioSet::forecast() const {
    const Mat in = in_sample_rows();
    if (in.rows() == 0) throw ValidationError("scenario set has no in-sample rows");
    return in.colwise().mean().transpose();
}

Mat ScenarioSet::zeta(bool in) const {
    const Vec mu = forecast();
    Mat rows = in ? in_sample_rows() : out_of_sample_rows();
    rows.rowwise() -= mu.transpose();
    return rows;
}

void ScenarioSet::split_first(int n_in) {
    in_sample.assign(samples.rows(), false);
    for (int k = 0; k < std::min(n_in, size()); ++k) in_sample[k] = true;
}

void ScenarioSet::validate() const {
    if (layout.dim() != dim()) throw ValidationError("scenario matrix width does not match drivers x horizon");
    if (static_cast<int>(in_sample.size()) != size()) throw ValidationError("scenario split markers missing");
    if (!samples.allFinite()) throw ValidationError("scenario set contains missing or non-finite values");
    const Mat in = in_sample_rows();
    if (in.rows() < 10 * dim()) {
        spdlog::warn("scenario set: {} in-sample rows for dimension {} (>= {} recommended)", in.rows(), dim(),
                     10 * dim());
    }
}

ScenarioSet load_scenarios(const std::string& path) {
    const csv::Table t = csv::read(path);
    const int c_split = t.column("split");
    std::map<std::string, std::map<int, int>> grid;  // driver -> t -> column
    std::vector<std::string> order;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        const std::string& h = t.header[c];
        if (static_cast<int>(c) == c_split || h == "id") continue;
        const auto us = h.rfind('_');
        if (us == std::string::npos || us + 1 == h.size()) {
            throw ParseError(path, 1, "column '" + h + "' is not of the form driver_tt");
        }
        const std::string driver = h.substr(0, us);
        int step = 0;
        try {
            std::size_t used = 0;
            step = std::stoi(h.substr(us + 1), &used);
            if (used != h.size() - us - 1) throw std::invalid_argument(h);
        } catch (const std::exception&) {
            throw ParseError(path, 1, "column '" + h + "' has a non-numeric time suffix");
        }
        if (!grid.count(driver)) order.push_back(driver);
        if (!grid[driver].emplace(step, static_cast<int>(c)).second) {
            throw ParseError(path, 1, "duplicate column '" + h + "'");
        }
    }
    if (order.empty()) throw ParseError(path, 1, "no driver columns");
    ScenarioSet s;
    s.layout.drivers = order;
    s.layout.horizon = static_cast<int>(grid[order[0]].size());
    for (const auto& d : order) {
        const auto& steps = grid[d];
        if (static_cast<int>(steps.size()) != s.layout.horizon || steps.begin()->first != 0 ||
            steps.rbegin()->first != s.layout.horizon - 1) {
            throw ParseError(path, 1, "driver '" + d + "' does not cover steps 0.." +
                                          std::to_string(s.layout.horizon - 1));
        }
    }
    s.samples.resize(static_cast<Eigen::Index>(t.rows.size()), s.layout.dim());
    s.in_sample.assign(t.rows.size(), true);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const csv::Row& row = t.rows[r];
        for (std::size_t k = 0; k < order.size(); ++k) {
            for (const auto& [step, col] : grid[order[k]]) {
                s.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k) * s.layout.horizon + step) =
                    csv::to_double(t, row, col);
            }
        }
        if (c_split >= 0) {
            const std::string& v = row.cells[c_split];
            if (v != "in" && v != "out") throw ParseError(path, row.line, "split must be 'in' or 'out'");
            s.in_sample[r] = v == "in";
        }
    }
    s.validate();
    return s;
}

void save_scenarios(const ScenarioSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot write file");
    out << std::setprecision(12) << "id,split";
    for (const auto& d : set.layout.drivers) {
        for (int t = 0; t < set.layout.horizon; ++t) {
            out << "," << d << "_" << std::setw(2) << std::setfill('0') << t << std::setfill(' ');
        }
    }
    out << "\n";
    for (int r = 0; r < set.size(); ++r) {
        out << r << "," << (set.in_sample[r] ? "in" : "out");
        for (int c = 0; c < set.dim(); ++c) out << "," << set.samples(r, c);
        out << "\n";
    }
}

}  // namespace flexcap
