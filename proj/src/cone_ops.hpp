#pragma once

// Jordan-algebra helpers for the product cone R+^l x Q^{q1} x ... x Q^{qk}.
// Internal to the interior-point engine; exposed for unit tests.

#include "flexcap/common.hpp"

#include <vector>

namespace flexcap::conic::detail {

struct ConeLayout {
    int linear = 0;
    std::vector<int> dims;
    std::vector<int> offsets;
    int total = 0;

    ConeLayout() = default;
    ConeLayout(int l, std::vector<int> soc_dims);
    int degree() const { return linear + static_cast<int>(dims.size()); }
};

Vec identity(const ConeLayout& k);
Vec jordan_product(const ConeLayout& k, const Vec& u, const Vec& v);
// Solves lambda o x = d for x.
Vec jordan_divide(const ConeLayout& k, const Vec& lambda, const Vec& d);
// Smallest t such that u + t e lies on the cone boundary (negative when u is interior).
double max_violation(const ConeLayout& k, const Vec& u);
// Largest step a >= 0 keeping x + a dx in the cone (capped at cap).
double max_step(const ConeLayout& k, const Vec& x, const Vec& dx, double cap);

/// Nesterov-Todd scaling W with W z = W^{-1} s, stored densely per cone.
struct NtScaling {
    Vec lp;                      // sqrt(s/z)
    std::vector<Mat> w;          // per second-order cone
    std::vector<Mat> w_inv;
    std::vector<Mat> w_sq;

    bool compute(const ConeLayout& k, const Vec& s, const Vec& z);
    Vec apply(const ConeLayout& k, const Vec& v) const;
    Vec apply_inverse(const ConeLayout& k, const Vec& v) const;
    Vec apply_squared(const ConeLayout& k, const Vec& v) const;
};

}  // namespace flexcap::conic::detail
