#pragma once

#include "vstab/regularizer.hpp"

namespace vstab {

/// Derivative of the i-th eigenvalue with respect to a parameter p, given the
/// matrix derivative dM = dM/dp:  v_i' dM u_i  (with v_i' u_i = 1).
Real eigenvalue_derivative(const Matrix& dm, const Eigenstructure& es, Index i);

/// Derivatives of all eigenvalues at once (the diagonal of V' dM U).
Vector eigenvalue_derivatives(const Matrix& dm, const Eigenstructure& es);

struct EigvecDerivatives {
    Matrix dU;  ///< column i is du_i/dp
    Matrix dV;  ///< column i is dv_i/dp
};

/// Modal-expansion derivatives of the right and left eigenvectors:
///   du_i/dp = sum_k alpha_ik u_k,   alpha_ik = (v_k' dM u_i) / (lambda_i - lambda_k), k != i,
///   alpha_ii chosen to preserve unit norm of u_i;
///   dv_i/dp = sum_k beta_ik v_k,    beta_ik = -alpha_ki.
/// Requires all eigenvalues simple; throws DegenerateSpectrum otherwise.
EigvecDerivatives eigenvector_derivatives(const Matrix& dm, const Eigenstructure& es,
                                          const Thresholds& th = {});

}  // namespace vstab
