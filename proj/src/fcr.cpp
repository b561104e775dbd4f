#include "flexcap/resources.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

namespace flexcap {

namespace {

constexpr double kNominalHz = 50.0;
constexpr double kFullActivationHz = 0.2;

double parse_timestamp(const csv::Table& t, const csv::Row& r, int col) {
    const std::string& s = r.cells[col];
    if (s.find('-') != std::string::npos && s.find(':') != std::string::npos) {
        std::tm tm{};
        std::istringstream in(s);
        in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
        if (in.fail()) {
            in.clear();
            in.str(s);
            in >> std::get_time(&tm, "%Y-%m-%d %H:%M:%S");
        }
        if (in.fail()) throw ParseError(t.path, r.line, "unrecognised timestamp '" + s + "'");
        return static_cast<double>(timegm(&tm));
    }
    return csv::to_double(t, r, col);
}

}  // namespace

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<FrequencySample> load_frequency_series(const std::string& path) {
    const csv::Table t = csv::read(path);
    const int c_time = t.require_column("timestamp");
    const int c_hz = t.require_column("hz");
    std::vector<FrequencySample> out;
    out.reserve(t.rows.size());
    for (const csv::Row& r : t.rows) out.push_back({parse_timestamp(t, r, c_time), csv::to_double(t, r, c_hz)});
    return out;
}

FcrEnergyStats fcr_energy_requirements(const std::vector<FrequencySample>& series, double block_hours) {
    if (series.size() < 2) throw ValidationError("frequency series needs at least two samples");
    if (!(block_hours > 0.0)) throw ValidationError("block length must be positive");
    const double dt = series[1].time - series[0].time;
    if (!(dt > 0.0)) throw ValidationError("frequency timestamps must increase");
    for (std::size_t k = 1; k < series.size(); ++k) {
        const double step = series[k].time - series[k - 1].time;
        if (std::abs(step - dt) > 1e-6 * dt) {
            throw ValidationError("frequency series has a gap or irregular step at sample " + std::to_string(k));
        }
    }
    const double block_s = block_hours * 3600.0;
    const auto per_block = static_cast<std::size_t>(std::llround(block_s / dt));
    if (per_block == 0 || std::abs(static_cast<double>(per_block) * dt - block_s) > 1e-6 * block_s) {
        throw ValidationError("block length is not a multiple of the sampling interval");
    }
    const std::size_t blocks = series.size() / per_block;
    if (blocks == 0) throw ValidationError("frequency series is shorter than one block");

    // the block spans exactly per_block intervals, so the integrals reduce to sample means
    FcrEnergyStats out;
    const auto n = static_cast<double>(per_block);
    for (std::size_t b = 0; b < blocks; ++b) {
        double net = 0.0;
        double gross = 0.0;
        for (std::size_t k = b * per_block; k < (b + 1) * per_block; ++k) {
            const double p = std::clamp((kNominalHz - series[k].hz) / kFullActivationHz, -1.0, 1.0);
            net += p;
            gross += std::abs(p);
        }
        out.bias.push_back(std::abs(net) / n);
        out.throughput.push_back(gross / n);
    }
    out.bias_p95 = percentile(out.bias, 0.95);
    out.throughput_p95 = percentile(out.throughput, 0.95);
    return out;
}

}  // namespace flexcap
