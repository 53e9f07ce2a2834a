#include "vstab/eigen_derivatives.hpp"

namespace vstab {

Real eigenvalue_derivative(const Matrix& dm, const Eigenstructure& es, Index i) {
    return es.V.col(i).dot(dm * es.U.col(i));
}

Vector eigenvalue_derivatives(const Matrix& dm, const Eigenstructure& es) {
    return (es.V.transpose() * dm * es.U).diagonal();
}

EigvecDerivatives eigenvector_derivatives(const Matrix& dm, const Eigenstructure& es,
                                          const Thresholds& th) {
    const Index n = es.size();
    if (es.min_gap < th.eps_gap) {
        throw DegenerateSpectrum("eigenvector derivatives need simple eigenvalues");
    }

    const Matrix w = es.V.transpose() * dm * es.U;  // w(k, i) = v_k' dM u_i
    const Matrix gram = es.U.transpose() * es.U;    // u_j' u_i, for the norm row

    Matrix alpha = Matrix::Zero(n, n);  // alpha(i, k)
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < n; ++k) {
            if (k == i) continue;
            alpha(i, k) = w(k, i) / (es.lambdas[i] - es.lambdas[k]);
        }
        Real s = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            s += alpha(i, j) * gram(j, i);
        }
        alpha(i, i) = -s;
    }

    EigvecDerivatives out;
    out.dU = es.U * alpha.transpose();          // du_i = sum_k alpha_ik u_k
    out.dV = es.V * (-alpha);                   // beta_ik = -alpha_ki
    return out;
}

}  // namespace vstab
