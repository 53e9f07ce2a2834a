#pragma once

#include "vstab/simulator_types.hpp"
#include "vstab/transformed_system.hpp"

#include <cstdint>
#include <string>

namespace vstab {

/// Surface-contact point extracted from a terminated trajectory.
struct SingularHit {
    SystemState z_sp;
    Real t_hit = 0.0;
    Real lambda1_at_hit = 0.0;
    std::string trajectory_id;
};

/// A pseudo-equilibrium point with saddle structure, solved as the
/// nearest-point projection of a surface hit onto the pseudo-equilibrium set.
struct PseudoSaddle {
    SystemState z_cps;
    Matrix J;                ///< transformed Jacobian at z_cps (saddle form)
    Real mu_unstable = 0.0;  ///< positive eigenvalue of J
    Real nu_stable = 0.0;    ///< negative eigenvalue of J
    Vector eta;              ///< unit left eigenvector of J for mu
    Real g_norm = 0.0;
    Real lambda1 = 0.0;
    Real kappa_norm = 0.0;
    Real distance = 0.0;     ///< ||z_cps - z_sp||_2
    int iterations = 0;
};

/// Refine the last accepted state of a SingularSurface-terminated trajectory
/// by bisection on lambda1 between the last step and the failed step.
/// Throws NoSingularContact when the trajectory ended for any other reason.
SingularHit detect_singular_hit(const Trajectory& traj, const Scenario& sc,
                                const Thresholds& th = {});

struct SaddleSolveOptions {
    int max_outer = 200;        ///< outer iteration cap
    int multistart = 5;         ///< random restarts on failure
    Real restart_sigma = 0.01;  ///< per-unit perturbation for restarts
    Real stationarity_tol = 1e-6;
    std::uint64_t seed = 0;
};

/// Solve the constrained nearest-point problem
///   min ||z - z_sp||_2  s.t.  g = 0, lambda1 = 0, v1' (Dxg) f = 0
/// by sequential quadratic steps started from z_sp.  Constraint gradients are
/// analytic for g and lambda1; the kappa constraint uses central differences.
///
/// Throws NoConvergence after the iteration cap (with multistart retries) and
/// NotASaddle when the converged point fails the one-positive/one-negative
/// eigenvalue test.
PseudoSaddle controlling_pseudo_saddle(const SingularHit& hit, const PowerNetwork& net,
                                       const DeviceSet& devices, const Thresholds& th = {},
                                       const SaddleSolveOptions& opts = {});

}  // namespace vstab
