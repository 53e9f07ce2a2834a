#include "vstab/regularizer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace vstab {

namespace {

constexpr Real kOverflowLimit = 1e280;

}  // namespace

Eigenstructure eigendecompose(const Matrix& m, const Thresholds& th, const Vector* track_u1) {
    const Index n = m.rows();
    Eigen::EigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigendecomposition failed to converge");
    }

    const auto& ev = solver.eigenvalues();
    for (Index i = 0; i < n; ++i) {
        if (std::abs(ev[i].imag()) > th.eps_complex * std::abs(ev[i].real()) + 1e-9) {
            throw ComplexSpectrum("eigenvalue with non-negligible imaginary part: " +
                                  std::to_string(ev[i].real()) + " + " +
                                  std::to_string(ev[i].imag()) + "i");
        }
    }

    Vector lambdas(n);
    Matrix u(n, n);
    for (Index i = 0; i < n; ++i) {
        lambdas[i] = ev[i].real();
        u.col(i) = solver.eigenvectors().col(i).real();
        const Real nrm = u.col(i).norm();
        if (nrm > 0.0) u.col(i) /= nrm;
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(lambdas[a]) < std::abs(lambdas[b]);
    });

    // Branch tracking: among eigenvalues whose modulus is within the tie
    // window of the minimum, prefer the one aligned with the previous u1.
    if (track_u1 != nullptr && track_u1->size() == n) {
        const Real min_mod = std::abs(lambdas[order[0]]);
        std::size_t best = 0;
        Real best_overlap = -1.0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            if (std::abs(lambdas[order[k]]) > (1.0 + th.lambda_tie) * min_mod + 1e-300) break;
            const Real overlap = std::abs(track_u1->dot(u.col(order[k])));
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = k;
            }
        }
        if (best != 0) std::rotate(order.begin(), order.begin() + best, order.begin() + best + 1);
    }

    Eigenstructure es;
    es.lambdas.resize(n);
    es.U.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        es.lambdas[i] = lambdas[order[static_cast<std::size_t>(i)]];
        es.U.col(i) = u.col(order[static_cast<std::size_t>(i)]);
    }

    // Deterministic sign: largest-magnitude entry of each u_i positive.
    for (Index i = 0; i < n; ++i) {
        Index imax = 0;
        es.U.col(i).cwiseAbs().maxCoeff(&imax);
        if (es.U(imax, i) < 0.0) es.U.col(i) = -es.U.col(i);
    }

    es.min_gap = std::numeric_limits<Real>::infinity();
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            es.min_gap = std::min(es.min_gap, std::abs(es.lambdas[i] - es.lambdas[j]));
    if (es.min_gap < th.eps_gap) {
        throw DegenerateSpectrum("eigenvalue gap " + std::to_string(es.min_gap) +
                                 " below eps_gap");
    }

    // Left eigenvectors from V' U = I.
    es.V = es.U.transpose().partialPivLu().solve(Matrix::Identity(n, n));
    return es;
}

Matrix adjugate_eigen(const Eigenstructure& es) {
    const Index n = es.size();
    Vector coeff(n);
    for (Index i = 0; i < n; ++i) {
        Real p = 1.0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            p *= es.lambdas[j];
            if (std::abs(p) > kOverflowLimit) {
                throw Overflow("adjugate eigen-expansion coefficient overflow");
            }
        }
        coeff[i] = p;
    }
    return es.U * coeff.asDiagonal() * es.V.transpose();
}

Real determinant_eigen(const Eigenstructure& es) {
    Real d = 1.0;
    for (Index i = 0; i < es.size(); ++i) {
        d *= es.lambdas[i];
        if (std::abs(d) > kOverflowLimit) {
            throw Overflow("determinant overflow in eigenvalue product");
        }
    }
    return d;
}

FieldEval sigma_prime_field(const Vector& x, const Vector& y, const PowerNetwork& net,
                            const DeviceSet& devices, const Thresholds& th) {
    const Matrix dyg = jacobian_y(x, y, net, th);
    const Eigenstructure es = eigendecompose(dyg, th);
    if (std::abs(es.lambda1()) <= th.eps_sing) {
        throw NearSingular("minimum-modulus eigenvalue " + std::to_string(es.lambda1()) +
                           " within eps_sing of the singular surface");
    }
    FieldEval out;
    out.lambda1 = es.lambda1();
    out.xdot = f_eval(x, y, devices, net.omega0, th);
    const Vector h = jacobian_x(x, y, net) * out.xdot;
    out.ydot = -dyg.partialPivLu().solve(h);
    return out;
}

FieldEval sigma_lambda_field(const Vector& x, const Vector& y, const PowerNetwork& net,
                             const DeviceSet& devices, Real s, const Thresholds& th,
                             const Vector* track_u1) {
    const Matrix dyg = jacobian_y(x, y, net, th);
    const Eigenstructure es = eigendecompose(dyg, th, track_u1);
    const Real l1 = es.lambda1();

    FieldEval out;
    out.lambda1 = l1;
    const Vector f = f_eval(x, y, devices, net.omega0, th);
    const Vector h = jacobian_x(x, y, net) * f;

    out.xdot = s * l1 * f;
    // u1 v1' carries unit weight; the regular part is scaled by lambda1/lambda_i.
    Vector c = es.V.transpose() * h;
    for (Index i = 1; i < es.size(); ++i) c[i] *= l1 / es.lambdas[i];
    out.ydot = -s * (es.U * c);
    return out;
}

FieldEval sigma_dprime_field(const Vector& x, const Vector& y, const PowerNetwork& net,
                             const DeviceSet& devices, const Thresholds& th) {
    const Matrix dyg = jacobian_y(x, y, net, th);
    const Eigenstructure es = eigendecompose(dyg, th);

    FieldEval out;
    out.lambda1 = es.lambda1();
    const Vector f = f_eval(x, y, devices, net.omega0, th);
    const Vector h = jacobian_x(x, y, net) * f;

    const Real det = determinant_eigen(es);
    const Matrix adj = adjugate_eigen(es);
    out.xdot = det * f;
    out.ydot = -adj * h;
    if (!out.xdot.allFinite() || !out.ydot.allFinite()) {
        throw Overflow("determinant-rescaled field overflow");
    }
    return out;
}

}  // namespace vstab
