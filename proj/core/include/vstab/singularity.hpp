#pragma once

#include "vstab/regularizer.hpp"

#include <string>

namespace vstab {

enum class SingularityClass {
    Regular,
    SingularGeneric,
    PseudoEquilibrium,
    SemiSingularCandidate,
};

[[nodiscard]] std::string to_string(SingularityClass c);

/// Indicators evaluated at one state: the minimum-modulus eigenvalue of the
/// algebraic Jacobian (singularity indicator), the pseudo-equilibrium residual
/// ||u1 v1' (Dxg) f||, and the tangency scalar (D_y lambda1) u1.
struct SingularityReport {
    Real lambda1 = 0.0;
    Real g_norm = 0.0;
    Real psi_residual = 0.0;
    Real xi_scalar = 0.0;         ///< exact sum over all voltage coordinates
    Real xi_scalar_approx = 0.0;  ///< diagnostic: dominant Vx-block approximation
    SingularityClass classification = SingularityClass::Regular;
};

/// Minimum-modulus eigenvalue of jacobian_y at the given state.
Real singularity_indicator(const Vector& x, const Vector& y, const PowerNetwork& net,
                           const Thresholds& th = {}, const Vector* track_u1 = nullptr);

struct PseudoEquilibriumResidual {
    Real g_norm = 0.0;
    Real lambda1 = 0.0;
    Real kappa_norm = 0.0;  ///< ||u1 v1' (Dxg) f|| = |v1' (Dxg) f| for unit u1
};

/// The three residuals whose simultaneous smallness defines membership in the
/// pseudo-equilibrium set.
PseudoEquilibriumResidual pseudo_equilibrium_residual(const Vector& x, const Vector& y,
                                                      const PowerNetwork& net,
                                                      const DeviceSet& devices,
                                                      const Thresholds& th = {});

/// Directional derivative of lambda1 along u1 in the algebraic variables:
///   sum_k (v1' dDyg/dy_k u1) u1[k].
/// Nonzero values certify the absence of semi-singular points on the sampled
/// surface patch.  When `approx_out` is given it receives the diagnostic
/// Vx-block-only approximation.
Real semi_singular_scalar(const Vector& x, const Vector& y, const PowerNetwork& net,
                          const Thresholds& th = {}, Real* approx_out = nullptr);

/// Full classification of a state against the singular-surface taxonomy.
SingularityReport classify(const Vector& x, const Vector& y, const PowerNetwork& net,
                           const DeviceSet& devices, const Thresholds& th = {});

}  // namespace vstab
