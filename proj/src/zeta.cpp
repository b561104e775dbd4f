#include "flexcap/zeta.hpp"

#include "flexcap/common.hpp"

namespace flexcap {

int ZetaLayout::driver_index(const std::string& name) const {
    for (std::size_t k = 0; k < drivers.size(); ++k) {
        if (drivers[k] == name) return static_cast<int>(k);
    }
    return -1;
}

int ZetaLayout::index(const std::string& driver, int t) const {
    const int k = driver_index(driver);
    if (k < 0) throw ValidationError("unknown uncertainty driver '" + driver + "'");
    if (t < 0 || t >= horizon) throw ValidationError("time index out of horizon for driver '" + driver + "'");
    return k * horizon + t;
}

}  // namespace flexcap
