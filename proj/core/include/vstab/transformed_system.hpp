#pragma once

#include "vstab/eigen_derivatives.hpp"
#include "vstab/regularizer.hpp"

namespace vstab {

/// Jacobian of the rescaled field with respect to the full state z = [x; y].
struct TransformedJacobian {
    Matrix J;
    SystemState evaluated_at;
    bool at_saddle = false;
    Real sign = 1.0;
};

/// Assemble the Jacobian of sigma_lambda_field at z.
///
/// The x-rows are lambda1 df/dz + f (dlambda1/dz); the y-rows combine the
/// per-coordinate derivative of the spectral weighting applied to (Dxg) f with
/// the weighting applied to d((Dxg) f)/dz.  With `at_saddle` set, the terms
/// that vanish on the pseudo-equilibrium set (lambda1 = 0, v1'(Dxg)f = 0) are
/// dropped and the rank-deficient saddle form is produced instead.
TransformedJacobian transformed_jacobian(const SystemState& z, const PowerNetwork& net,
                                         const DeviceSet& devices, bool at_saddle = false,
                                         Real s = 1.0, const Thresholds& th = {},
                                         const Vector* track_u1 = nullptr);

/// Significant eigenstructure of a saddle Jacobian.
struct SaddleSpectrum {
    Real mu = 0.0;       ///< the positive significant eigenvalue (0 if none)
    Real nu = 0.0;       ///< the negative significant eigenvalue (0 if none)
    int n_positive = 0;  ///< significant eigenvalues with positive real part
    int n_negative = 0;
    Vector eta;          ///< unit left eigenvector of J for mu (empty unless n_positive == 1)
    Vector w_unstable;   ///< unit right eigenvector for mu
    Vector w_stable;     ///< unit right eigenvector for nu (empty unless n_negative == 1)
};

/// Classify the eigenvalues of J against the significance cut
/// eps_eig = eps_eig_rel * ||J||_F and extract the saddle directions.
SaddleSpectrum analyze_saddle_spectrum(const Matrix& j, const Thresholds& th = {});

}  // namespace vstab
