#pragma once

#include <stdexcept>

namespace evmpc::lac {

struct DegenerateReading : std::domain_error {
    using std::domain_error::domain_error;
};

/// First-order battery capacity estimate from metered grid energy and the
/// dashboard SoC readings at both ends of a session.
inline double estimate_capacity(double meter_energy_kwh, double soc_start_pct, double soc_end_pct,
                                double xi)
{
    const double delta_pct = soc_end_pct - soc_start_pct;
    if (!(delta_pct > 0.0)) {
        throw DegenerateReading("SoC did not increase over the session");
    }
    if (!(meter_energy_kwh > 0.0)) {
        throw DegenerateReading("no metered energy");
    }
    return meter_energy_kwh * (1.0 - xi) / (delta_pct / 100.0);
}

} // namespace evmpc::lac
