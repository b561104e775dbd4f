#pragma once

// Dense vector/matrix <-> JSON arrays.

#include "flexcap/common.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace flexcap::jsonio {

inline nlohmann::json vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json mat(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Vec row = m.row(r).transpose();
        rows.push_back(vec(row));
    }
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Vec to_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Mat to_mat(const nlohmann::json& j) {
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != r) throw ValidationError("matrix row count mismatch");
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const Vec row = to_vec(data[static_cast<std::size_t>(i)]);
        if (row.size() != c) throw ValidationError("matrix column count mismatch");
        m.row(i) = row.transpose();
    }
    return m;
}

}  // namespace flexcap::jsonio
