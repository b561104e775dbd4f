#pragma once

// Layout of the stacked uncertainty driver: zeta = [d0_0..d0_{T-1}, d1_0..].
// Entries are deviations from the forecast mean in the driver's own unit.

#include <string>
#include <vector>

namespace flexcap {

struct ZetaLayout {
    std::vector<std::string> drivers;
    int horizon = 0;

    int dim() const { return static_cast<int>(drivers.size()) * horizon; }
    int driver_index(const std::string& name) const;  // -1 if absent
    int index(const std::string& driver, int t) const;  // throws ValidationError if absent
};

}  // namespace flexcap
