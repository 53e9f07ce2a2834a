#pragma once

#include "vstab/errors.hpp"
#include "vstab/thresholds.hpp"
#include "vstab/types.hpp"

#include <string>
#include <variant>
#include <vector>

namespace vstab {

// =============================================================================
// Device parameter records
// =============================================================================

/// Synchronous machine: swing dynamics, one-axis flux decay, first-order exciter.
struct MachineParams {
    Real M = 1.0;     ///< inertia (s^2 on system base)
    Real D = 0.0;     ///< damping
    Real Td0 = 1.0;   ///< open-circuit transient time constant (s)
    Real xd = 1.0;    ///< d-axis synchronous reactance (pu)
    Real xdp = 0.3;   ///< d-axis transient reactance (pu)
    Real Ta = 0.1;    ///< exciter time constant (s)
    Real Ka = 50.0;   ///< exciter gain
    Real Vref = 1.0;  ///< voltage reference (pu)
    Real Pm = 0.0;    ///< mechanical power (pu)
};

/// Grid-forming converter under virtual-synchronous-machine control,
/// represented as an internal EMF behind the outlet impedance.
struct GfmParams {
    Real M = 1.0;     ///< virtual inertia
    Real D = 0.0;     ///< virtual damping
    Real Ki = 0.5;    ///< internal-voltage integrator time constant (s)
    Real Tu = 0.05;   ///< virtual excitation time constant (s)
    Real Kq = 0.2;    ///< Q-V droop gain
    Real Pref = 0.0;  ///< active power setpoint (pu)
    Real Qref = 0.0;  ///< reactive power setpoint (pu)
    Real Vref = 1.0;  ///< voltage reference (pu)
    Real xl = 0.15;   ///< outlet impedance (pu)
};

struct Device {
    std::string name;
    Index bus = 0;  ///< terminal bus index; equals device index by construction
    std::variant<MachineParams, GfmParams> params;

    [[nodiscard]] bool is_machine() const { return std::holds_alternative<MachineParams>(params); }
    [[nodiscard]] const MachineParams& machine() const { return std::get<MachineParams>(params); }
    [[nodiscard]] const GfmParams& gfm() const { return std::get<GfmParams>(params); }

    /// Reactance between internal EMF and terminal bus.
    [[nodiscard]] Real reactance() const {
        return is_machine() ? machine().xdp : gfm().xl;
    }
};

using DeviceSet = std::vector<Device>;

/// Per-device electrical quantities derived from (E, delta) behind the device
/// reactance and the terminal voltage, consistent with the Norton injection
/// used by the network equations.
struct DeviceElectrical {
    Real pe = 0.0;   ///< active power at the internal EMF (= terminal power, lossless)
    Real id = 0.0;   ///< d-axis current (machines)
    Real qe = 0.0;   ///< reactive power at the terminal (converters)
    Real vmag = 0.0; ///< terminal voltage magnitude
};

DeviceElectrical device_electrical(const Device& dev, Real delta, Real emf, Real vgx, Real vgy);

// =============================================================================
// Differential equations f and their Jacobians
// =============================================================================

/// Stacked right-hand side of the device differential equations.
/// Throws VoltageCollapseGuard when a device terminal voltage magnitude falls
/// below the floor (the exciter path normalizes by |V|).
Vector f_eval(const Vector& x, const Vector& y, const DeviceSet& devices, Real omega0,
              const Thresholds& th = {});

struct FJacobian {
    Matrix dfdx;  ///< 4 n_dev square
    Matrix dfdy;  ///< 4 n_dev  x  2 n_bus
};

/// Analytic derivatives of f with respect to x and y.
FJacobian f_jacobian(const Vector& x, const Vector& y, const DeviceSet& devices, Index n_bus,
                     Real omega0, const Thresholds& th = {});

}  // namespace vstab
