#pragma once

#include "vstab/errors.hpp"
#include "vstab/thresholds.hpp"
#include "vstab/types.hpp"

#include <vector>

namespace vstab {

// =============================================================================
// Reduced network model
// =============================================================================

/// Reduced transmission network with the load model folded in.
///
/// Bus ordering: device terminal buses first (one per device, in device
/// order), then load buses.  B and G are the imaginary and real parts of the
/// reduced admittance matrix after the constant-impedance load portion has
/// been moved into it; P and Q hold the remaining *net constant-power
/// injection* per bus (negative at consuming loads, positive for
/// grid-following converters), already scaled by the constant-power fraction.
///
/// Immutable after construction; safe to share across threads.
struct PowerNetwork {
    Index n_gen = 0;   ///< device terminal buses
    Index n_load = 0;  ///< load buses
    Matrix B;          ///< susceptance part, order n_gen + n_load
    Matrix G;          ///< conductance part
    Matrix B_le;       ///< EMF coupling, (n_gen+n_load) x n_gen, diag(1/x') over zeros
    Vector P;          ///< constant-power active injection per bus
    Vector Q;          ///< constant-power reactive injection per bus
    Vector rho;        ///< constant-power fraction per bus, in [0, 1]
    ComplexVector yz_diag;  ///< constant-impedance load admittance diagonal
    Real omega0 = 2.0 * 3.14159265358979323846 * 60.0;  ///< synchronous frequency, rad/s

    [[nodiscard]] Index n_bus() const { return n_gen + n_load; }
    [[nodiscard]] StateLayout layout() const { return {n_gen, n_bus()}; }
};

/// Voltage components on the synchronous x-y frame, one pair per bus.
struct AlgebraicState {
    Vector vx;
    Vector vy;

    [[nodiscard]] Vector stacked() const {
        Vector y(vx.size() + vy.size());
        y << vx, vy;
        return y;
    }
};

// =============================================================================
// Network construction helpers
// =============================================================================

/// Eliminate the buses not listed in `retained` from a full admittance matrix,
/// preserving injected currents at the retained buses.
///
/// Throws SingularElimination when the eliminated principal block is
/// numerically singular.
ComplexMatrix kron_reduce(const ComplexMatrix& y_full, const std::vector<Index>& retained);

/// Constant-impedance admittance of the non-constant-power load portion:
/// yz[i] = (1 - rho[i]) * conj(s_load[i]) / |v0[i]|^2.
///
/// `s_load` is the complex load power in injection convention.  Throws
/// ZeroBaseVoltage when any base voltage magnitude vanishes.
ComplexVector constant_impedance_loads(const ComplexVector& s_load, const Vector& rho,
                                       const ComplexVector& v0);

// =============================================================================
// Algebraic equations g and their Jacobians
// =============================================================================

/// Residual of the network constraints, stacked as
///   [B Vx + G Vy + IGx - ILx;  G Vx - B Vy + IGy - ILy]
/// with device injections from the EMF coupling and constant-power load
/// currents.  Throws VoltageCollapseGuard when a bus carrying constant power
/// falls below the voltage floor.
Vector algebraic_residual(const Vector& x, const Vector& y, const PowerNetwork& net,
                          const Thresholds& th = {});

/// Jacobian of the residual with respect to y = [Vx; Vy]:
///   [[B - b, G - g], [G + g, -B - b]]
/// where b and g are the constant-power load diagonals.
Matrix jacobian_y(const Vector& x, const Vector& y, const PowerNetwork& net,
                  const Thresholds& th = {});

/// Jacobian of the residual with respect to x.  Only the delta and E column
/// blocks are nonzero; omega and Efd never enter the network equations.
Matrix jacobian_x(const Vector& x, const Vector& y, const PowerNetwork& net);

// =============================================================================
// Derivatives of the Jacobians (inputs to the transformed-system machinery)
// =============================================================================

/// Derivative of jacobian_y with respect to the y coordinate with index k
/// (k < n_bus: Vx component; k >= n_bus: Vy component).  Dense, with the four
/// nonzero entries of the sparse structure filled in.
Matrix dyg_dy(const Vector& y, const PowerNetwork& net, Index k, const Thresholds& th = {});

/// v^T (d Dyg / d y_k) u evaluated without forming the dense derivative.
Real dyg_dy_bilinear(const Vector& y, const PowerNetwork& net, Index k, const Vector& v,
                     const Vector& u, const Thresholds& th = {});

/// Derivative of jacobian_x with respect to the x coordinate with index k.
/// Zero except for k in the delta or E blocks.
Matrix dxg_dx(const Vector& x, const PowerNetwork& net, Index k);

/// (d Dxg / d x_k) * f without forming the dense derivative.
Vector dxg_dx_apply(const Vector& x, const PowerNetwork& net, Index k, const Vector& f);

}  // namespace vstab
