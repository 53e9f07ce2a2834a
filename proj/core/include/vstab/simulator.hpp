#pragma once

#include "vstab/simulator_types.hpp"

#include <optional>

namespace vstab {

// =============================================================================
// Algebraic and equilibrium solves
// =============================================================================

/// Newton solve of g(x, y) = 0 in y from y_guess, using the analytic Jacobian.
/// Converges in one iteration when the constraints are linear in y.
/// Throws AlgebraicNoConvergence after 50 iterations (ill-conditioning near
/// the singular surface) and propagates VoltageCollapseGuard.
Vector solve_algebraic(const Vector& x, const Vector& y_guess, const PowerNetwork& net,
                       const Thresholds& th = {}, int* iterations_out = nullptr);

/// Newton solve of the synchronized steady state: all non-rotor equations of
/// f vanish, the constraints hold, and the rotors share one uniform frequency
/// offset (the governor-free model absorbs post-disturbance power imbalance
/// as a small synchronous drift).  The rotation gauge is pinned to the
/// guess's first rotor angle.
SystemState solve_equilibrium(const SystemState& guess, const PowerNetwork& net,
                              const DeviceSet& devices, const Thresholds& th = {});

// =============================================================================
// Time-domain integration
// =============================================================================

struct SimOptions {
    Real rtol = 1e-8;
    Real atol = 1e-10;
    Real dt_min = 1e-9;
    Real init_residual_tol = 1e-6;
    Real divergence_delta = 4.0 * 3.14159265358979323846;  ///< rotor-angle spread guard
    bool record_all = true;
    Thresholds thresholds{};
};

/// Semi-explicit integration of the fault study: embedded adaptive
/// Runge-Kutta on x with a per-stage algebraic solve on y; the network is
/// switched at fault application and clearing with y re-solved after each
/// switch.  Terminates at t_end, on algebraic non-convergence (singular
/// surface), on rotor-angle divergence, or on a voltage-floor guard.
Trajectory simulate(const Scenario& sc, const SimOptions& opts = {});

struct TransformedOptions {
    Real tau_end = 1e9;          ///< rescaled-time horizon
    Real arclength_cap = 1e9;    ///< stop once the path length exceeds this
    Real lambda_stop = -1e9;     ///< stop once lambda1 (oriented) drops below this
    Real rtol = 1e-8;
    Real atol = 1e-10;
    Real dtau_max = 1e-2;
    int project_every = 10;      ///< Newton projection onto g = 0 cadence
    Thresholds thresholds{};
};

/// Plain ODE integration of the minimum-modulus-eigenvalue rescaled field from
/// a point on the constraint set, with periodic projection back onto g = 0.
/// The run is parameterized by tau; physical time is reconstructed by
/// quadrature of lambda1 dtau.  The field is globally defined, so the run
/// continues smoothly through the singular surface.
Trajectory simulate_transformed(const Scenario& sc, const SystemState& from,
                                const TransformedOptions& opts = {});

/// Fixed-step RK4 advance of the DAE over [t0, t1] against a fixed network.
/// Used by hit refinement; throws on algebraic failure like simulate does.
SystemState advance_dae(const SystemState& from, Real t0, Real t1, const PowerNetwork& net,
                        const DeviceSet& devices, const Thresholds& th = {}, int substeps = 4);

// =============================================================================
// Critical clearing time
// =============================================================================

struct CctOptions {
    Real tol = 0.005;  ///< bisection interval width, s
    SimOptions sim{};
    int max_threads = 1;  ///< used for the initial bracket verification
};

struct CctResult {
    Real cct = 0.0;  ///< midpoint of the final bracket
    Real lo = 0.0;   ///< largest duration verified stable
    Real hi = 0.0;   ///< smallest duration verified unstable
    std::vector<std::pair<Real, bool>> history;  ///< (duration, stable) in query order
    bool monotone = true;  ///< no stable-above-unstable inversion observed
};

/// Stability verdict for a completed run: the rotation-invariant distance to
/// the equilibrium must not grow over the last fifth of the run.
bool is_stable_outcome(const Trajectory& traj, const SystemState& sep, const StateLayout& l);

/// Bisection on fault duration between a stable and an unstable bracket.
/// Throws BracketInvalid when the endpoints do not bracket the boundary.
CctResult compute_cct(const Scenario& sc, Real t_lo, Real t_hi, const CctOptions& opts = {});

}  // namespace vstab
