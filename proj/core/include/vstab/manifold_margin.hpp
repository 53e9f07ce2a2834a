#pragma once

#include "vstab/anchor_solver.hpp"

namespace vstab {

/// Linear model of the pseudo-saddle's stable manifold: the hyperplane through
/// z_cps orthogonal to the unstable left eigenvector.
struct ManifoldModel {
    SystemState z_cps;
    Vector eta;  ///< unit left eigenvector, sign fixed so d_p(sep) > 0
    Real mu = 0.0;
};

/// Build the manifold model from a solved saddle, orienting eta against the
/// scenario's stable equilibrium.  Throws NoUnstableDirection or
/// MultipleUnstable when the saddle spectrum is not a simple saddle, and
/// DegenerateSEP when the equilibrium lies numerically on the manifold.
ManifoldModel build_manifold(const PseudoSaddle& saddle, const SystemState& sep,
                             const Thresholds& th = {});

/// Signed distance d_p(z) = (z - z_cps)' eta.  Approximation error is second
/// order in the distance from the saddle.
Real manifold_value(const SystemState& z, const ManifoldModel& model);

/// Stability margin  C_V = d_p(z_f1) / d_p(z_sep):  positive when the
/// fault-cleared state and the equilibrium lie on the same side of the
/// manifold.  Throws DegenerateSEP when |d_p(z_sep)| vanishes.
Real stability_margin(const SystemState& z_f1, const SystemState& z_sep,
                      const ManifoldModel& model);

}  // namespace vstab
