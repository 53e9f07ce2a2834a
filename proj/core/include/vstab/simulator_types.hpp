#pragma once

#include "vstab/device_dynamics.hpp"
#include "vstab/grid_model.hpp"

#include <string>
#include <vector>

namespace vstab {

/// A fault study: three fully built networks plus timing.  Networks are
/// immutable; switching topology never mutates a network in place.
struct Scenario {
    std::string name;
    PowerNetwork pre_fault;
    PowerNetwork fault_on;
    PowerNetwork post_fault;
    DeviceSet devices;
    Real fault_start = 0.0;     ///< s
    Real fault_duration = 0.0;  ///< s
    Real t_end = 1.0;           ///< s
    Real dt_max = 0.01;         ///< s
    Real constant_power_share = 0.0;  ///< documentation only; baked into networks
    SystemState initial;        ///< pre-fault equilibrium

    [[nodiscard]] const PowerNetwork& network_at(Real t) const {
        if (t < fault_start) return pre_fault;
        if (t < fault_start + fault_duration) return fault_on;
        return post_fault;
    }
    [[nodiscard]] StateLayout layout() const { return pre_fault.layout(); }
};

enum class Termination {
    Completed,
    SingularSurface,
    Divergence,
    GuardTripped,
};

[[nodiscard]] std::string to_string(Termination t);

/// Time-stamped state sequence with per-step diagnostics.  For runs of the
/// rescaled system the `tau` / `t_reconstructed` columns are filled and
/// `times` mirrors the reconstructed time.
struct Trajectory {
    std::vector<Real> times;
    std::vector<SystemState> states;
    std::vector<Real> lambda1;
    std::vector<Real> g_inf;
    Termination termination = Termination::Completed;
    std::string detail;
    Real t_fail = 0.0;  ///< attempted time of the failed step (SingularSurface only)

    std::vector<Real> tau;              ///< rescaled-time runs only
    std::vector<Real> t_reconstructed;  ///< quadrature of lambda1 dtau

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] const SystemState& back() const { return states.back(); }
};

}  // namespace vstab
