#pragma once

// Seeded synthetic driver scenarios for examples, tests and benchmarks.

#include "flexcap/uncertainty.hpp"

#include <cstdint>

namespace flexcap {

struct SynthOptions {
    int samples = 1600;
    int in_sample = 1200;   // first rows in-sample
    double sigma = 1.0;     // marginal standard deviation
    double time_corr = 0.8; // AR(1) coefficient across steps
    double driver_corr = 0.3;
    double skew = 0.0;      // 0: Gaussian; > 0: standardized lognormal with this log-scale
    std::uint64_t seed = 1;
};

ScenarioSet synthetic_scenarios(const ZetaLayout& layout, const SynthOptions& opt);

}  // namespace flexcap
