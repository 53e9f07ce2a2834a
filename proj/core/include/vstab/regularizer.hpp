#pragma once

#include "vstab/device_dynamics.hpp"
#include "vstab/grid_model.hpp"

namespace vstab {

// =============================================================================
// Spectral data of the algebraic Jacobian
// =============================================================================

/// Real eigendecomposition of the algebraic Jacobian, sorted ascending by
/// modulus (index 0 is the minimum-modulus eigenvalue).  Right eigenvectors
/// are unit columns of U; left eigenvectors are columns of V scaled so that
/// v_i' u_j = delta_ij.  Eigenvector signs follow a deterministic convention
/// (largest-magnitude entry of u_i positive), with an optional tracking hint
/// that keeps index 0 on the same spectral branch along a trajectory.
struct Eigenstructure {
    Vector lambdas;
    Matrix U;
    Matrix V;
    Real min_gap = 0.0;

    [[nodiscard]] Index size() const { return lambdas.size(); }
    [[nodiscard]] Real lambda1() const { return lambdas[0]; }
    [[nodiscard]] Vector u1() const { return U.col(0); }
    [[nodiscard]] Vector v1() const { return V.col(0); }

    /// Reconstruction  sum_i lambda_i u_i v_i'.
    [[nodiscard]] Matrix reconstruct() const { return U * lambdas.asDiagonal() * V.transpose(); }
};

/// Eigendecompose a real matrix with near-real spectrum.
///
/// `track_u1`, when given, selects among near-minimal-modulus eigenvalues the
/// one whose eigenvector overlaps the previous step's u1 the most; this keeps
/// lambda1 continuous along trajectories where modulus ordering alone would
/// flip branches.
///
/// Throws ComplexSpectrum when an eigenvalue has a non-negligible imaginary
/// part, DegenerateSpectrum when two eigenvalues are closer than eps_gap.
Eigenstructure eigendecompose(const Matrix& m, const Thresholds& th = {},
                              const Vector* track_u1 = nullptr);

/// Adjugate through the spectral expansion: sum_i (prod_{j != i} lambda_j) u_i v_i'.
/// Valid also when the matrix is singular.  Throws Overflow when intermediate
/// products exceed representable magnitude.
Matrix adjugate_eigen(const Eigenstructure& es);

/// Determinant as the product of eigenvalues, with overflow detection.
Real determinant_eigen(const Eigenstructure& es);

// =============================================================================
// Transformed vector fields
// =============================================================================

struct FieldEval {
    Vector xdot;
    Vector ydot;
    Real lambda1 = 0.0;  ///< tracked minimum-modulus eigenvalue at the evaluation point
};

/// The index-1 reduction: xdot = f, ydot = -(Dyg)^{-1} (Dxg) f via linear solve.
/// Throws NearSingular when |lambda1| <= eps_sing.
FieldEval sigma_prime_field(const Vector& x, const Vector& y, const PowerNetwork& net,
                            const DeviceSet& devices, const Thresholds& th = {});

/// Minimum-modulus-eigenvalue rescaling of the reduced field, defined globally:
///   xdot = s lambda1 f
///   ydot = -s (u1 v1' + sum_{i>=2} (lambda1/lambda_i) u_i v_i') (Dxg) f.
/// `s` is the orientation sign, chosen once per trajectory so that time runs
/// forward in the region containing the stable equilibrium and held fixed.
FieldEval sigma_lambda_field(const Vector& x, const Vector& y, const PowerNetwork& net,
                             const DeviceSet& devices, Real s = 1.0, const Thresholds& th = {},
                             const Vector* track_u1 = nullptr);

/// Determinant-based rescaling (kept for the numerical-stability comparison):
///   xdot = f det(Dyg), ydot = -adj(Dyg) (Dxg) f.
/// Throws Overflow when the determinant or adjugate entries overflow.
FieldEval sigma_dprime_field(const Vector& x, const Vector& y, const PowerNetwork& net,
                             const DeviceSet& devices, const Thresholds& th = {});

}  // namespace vstab
