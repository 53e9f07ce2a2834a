#include "vstab/transformed_system.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace vstab {

TransformedJacobian transformed_jacobian(const SystemState& z, const PowerNetwork& net,
                                         const DeviceSet& devices, bool at_saddle, Real s,
                                         const Thresholds& th, const Vector* track_u1) {
    const StateLayout l = net.layout();
    const Index n = l.n_diff();
    const Index m = l.n_alg();
    const Vector& x = z.x;
    const Vector& y = z.y;

    const Vector f = f_eval(x, y, devices, net.omega0, th);
    const FJacobian fj = f_jacobian(x, y, devices, l.n_bus, net.omega0, th);
    Matrix dfdz(n, n + m);
    dfdz << fj.dfdx, fj.dfdy;

    const Matrix dyg = jacobian_y(x, y, net, th);
    const Eigenstructure es = eigendecompose(dyg, th, track_u1);
    const Real l1 = es.lambda1();

    const Matrix dxg = jacobian_x(x, y, net);
    const Vector h = dxg * f;
    const Vector c = es.V.transpose() * h;  // c_i = v_i' h

    // dlambda1/dz: zero on the x block (Dyg depends on voltages only).
    Eigen::RowVectorXd dl1(n + m);
    dl1.setZero();
    for (Index k = 0; k < m; ++k) {
        dl1[n + k] = dyg_dy_bilinear(y, net, k, es.V.col(0), es.U.col(0), th);
    }

    Matrix j(n + m, n + m);

    // x-rows: lambda1 df/dz + f dlambda1/dz; at a saddle lambda1 = 0 kills the
    // first term exactly.
    if (at_saddle) {
        j.topRows(n) = f * dl1;
    } else {
        j.topRows(n) = l1 * dfdz + f * dl1;
    }

    // d((Dxg) f)/dz = col_k (dDxg/dx_k f) + Dxg df/dz.
    Matrix dh(m, n + m);
    dh = dxg * dfdz;
    for (Index k = 0; k < n; ++k) {
        dh.col(k) += dxg_dx_apply(x, net, k, f);
    }

    // Spectral weighting T = u1 v1' + sum_{i>=2} (lambda1/lambda_i) u_i v_i'.
    Vector weights = Vector::Ones(es.size());
    if (!at_saddle) {
        for (Index i = 1; i < es.size(); ++i) weights[i] = l1 / es.lambdas[i];
    } else {
        weights.tail(es.size() - 1).setZero();
    }
    const Matrix t = es.U * weights.asDiagonal() * es.V.transpose();

    Matrix yblock = -(t * dh);

    // Per-voltage-coordinate derivative of the weighting, applied to h.  The
    // x coordinates contribute nothing (Dyg is voltage-only).
    for (Index k = 0; k < m; ++k) {
        const Matrix dm = dyg_dy(y, net, k, th);
        if (dm.isZero(0.0)) continue;
        const Vector dli = eigenvalue_derivatives(dm, es);
        const EigvecDerivatives evd = eigenvector_derivatives(dm, es, th);

        Vector gamma_h = Vector::Zero(m);
        if (at_saddle) {
            // u1 dv1'/dz_k h + (dlambda1/dz_k) sum_{i>=2} (v_i' h / lambda_i) u_i
            gamma_h += es.U.col(0) * evd.dV.col(0).dot(h);
            for (Index i = 1; i < es.size(); ++i) {
                gamma_h += dli[0] * (c[i] / es.lambdas[i]) * es.U.col(i);
            }
        } else {
            for (Index i = 1; i < es.size(); ++i) {
                gamma_h += dli[0] * (c[i] / es.lambdas[i]) * es.U.col(i);
                gamma_h -= dli[i] * (l1 / (es.lambdas[i] * es.lambdas[i])) * c[i] * es.U.col(i);
            }
            for (Index i = 0; i < es.size(); ++i) {
                const Real w = i == 0 ? 1.0 : l1 / es.lambdas[i];
                gamma_h += w * (evd.dU.col(i) * c[i] + es.U.col(i) * evd.dV.col(i).dot(h));
            }
        }
        yblock.col(n + k) -= gamma_h;
    }

    j.bottomRows(m) = yblock;

    TransformedJacobian out;
    out.J = s * j;
    out.evaluated_at = z;
    out.at_saddle = at_saddle;
    out.sign = s;
    return out;
}

SaddleSpectrum analyze_saddle_spectrum(const Matrix& j, const Thresholds& th) {
    const Real cut = th.eps_eig_rel * j.norm();
    Eigen::EigenSolver<Matrix> solver(j);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigendecomposition of transformed Jacobian failed");
    }

    SaddleSpectrum out;
    Index i_mu = -1, i_nu = -1;
    for (Index i = 0; i < j.rows(); ++i) {
        const Complex ev = solver.eigenvalues()[i];
        if (std::abs(ev) <= cut) continue;
        if (ev.real() > 0.0) {
            ++out.n_positive;
            out.mu = ev.real();
            i_mu = i;
        } else {
            ++out.n_negative;
            out.nu = ev.real();
            i_nu = i;
        }
    }

    if (out.n_positive == 1) {
        out.w_unstable = solver.eigenvectors().col(i_mu).real();
        out.w_unstable.normalize();
        // Left eigenvector of J for mu = right eigenvector of J'.
        Eigen::EigenSolver<Matrix> lsolver(j.transpose());
        Index best = 0;
        Real best_dist = std::numeric_limits<Real>::infinity();
        for (Index i = 0; i < j.rows(); ++i) {
            const Real dist = std::abs(lsolver.eigenvalues()[i] - Complex(out.mu, 0.0));
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        out.eta = lsolver.eigenvectors().col(best).real();
        out.eta.normalize();
    }
    if (out.n_negative == 1 && i_nu >= 0) {
        out.w_stable = solver.eigenvectors().col(i_nu).real();
        out.w_stable.normalize();
    }
    return out;
}

}  // namespace vstab
