#include "flexcap/synth.hpp"

#include <cmath>
#include <random>

namespace flexcap {

ScenarioSet synthetic_scenarios(const ZetaLayout& layout, const SynthOptions& opt) {
    const int nd = static_cast<int>(layout.drivers.size());
    const int horizon = layout.horizon;
    if (opt.samples < 1 || opt.in_sample < 0 || opt.in_sample > opt.samples) {
        throw ValidationError("synthetic scenarios: bad sample counts");
    }
    if (!(std::abs(opt.time_corr) < 1.0) || !(opt.driver_corr > -1.0 / std::max(1, nd - 1)) ||
        !(opt.driver_corr < 1.0) || !(opt.sigma >= 0.0) || !(opt.skew >= 0.0)) {
        throw ValidationError("synthetic scenarios: correlation or scale out of range");
    }
    Mat corr = Mat::Constant(nd, nd, opt.driver_corr);
    corr.diagonal().setOnes();
    const Mat mix = corr.llt().matrixL();
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;
    const double innov = std::sqrt(1.0 - opt.time_corr * opt.time_corr);
    const double s = opt.skew;
    const double ln_mean = std::exp(0.5 * s * s);
    const double ln_std = std::sqrt((std::exp(s * s) - 1.0) * std::exp(s * s));

    ScenarioSet set;
    set.layout = layout;
    set.samples.resize(opt.samples, layout.dim());
    for (int r = 0; r < opt.samples; ++r) {
        Vec state = Vec::Zero(nd);
        for (int t = 0; t < horizon; ++t) {
            Vec w(nd);
            for (int d = 0; d < nd; ++d) w(d) = normal(rng);
            const Vec shock = mix * w;
            state = t == 0 ? shock : Vec(opt.time_corr * state + innov * shock);
            for (int d = 0; d < nd; ++d) {
                const double g = state(d);
                const double x = s > 0.0 ? (std::exp(s * g) - ln_mean) / ln_std : g;
                set.samples(r, d * horizon + t) = opt.sigma * x;
            }
        }
    }
    set.split_first(opt.in_sample);
    return set;
}

}  // namespace flexcap
