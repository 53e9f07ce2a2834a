#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

#include "vstab/eigen_derivatives.hpp"

using namespace vstab;
using namespace vstab::test;
using Catch::Approx;

TEST_CASE("diagonal matrix: eigenvalue derivative is the diagonal selector",
          "[eigen_derivatives]") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 0.5;
    m(1, 1) = 2.0;
    const Eigenstructure es = eigendecompose(m);

    Matrix dm = Matrix::Zero(2, 2);
    dm(0, 0) = 1.0;  // perturb the first diagonal entry
    REQUIRE(eigenvalue_derivative(dm, es, 0) == Approx(1.0));
    REQUIRE(eigenvalue_derivative(dm, es, 1) == Approx(0.0).margin(1e-14));

    const EigvecDerivatives evd = eigenvector_derivatives(dm, es);
    REQUIRE(evd.dU.norm() == Approx(0.0).margin(1e-14));
    REQUIRE(evd.dV.norm() == Approx(0.0).margin(1e-14));
}

TEST_CASE("eigenvalue derivatives match finite differences", "[eigen_derivatives][property]") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<Real> entry(-1.0, 1.0);

    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 3 + static_cast<Index>(trial % 4);
        const Matrix m = random_spectrum_matrix(rng, n);
        Matrix dir(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) dir(i, j) = entry(rng);

        const Eigenstructure base = eigendecompose(m);
        const Real h = 1e-6;
        Eigenstructure plus = eigendecompose(m + h * dir);
        Eigenstructure minus = eigendecompose(m - h * dir);
        const auto map_p = match_eigenpairs(base, plus);
        const auto map_m = match_eigenpairs(base, minus);

        for (Index i = 0; i < n; ++i) {
            const Real fd = (plus.lambdas[map_p[static_cast<std::size_t>(i)]] -
                             minus.lambdas[map_m[static_cast<std::size_t>(i)]]) /
                            (2.0 * h);
            const Real analytic = eigenvalue_derivative(dir, base, i);
            REQUIRE(analytic == Approx(fd).margin(1e-6 * std::max(1.0, std::abs(fd))));
        }
    }
}

TEST_CASE("eigenvector derivatives match finite differences", "[eigen_derivatives][property]") {
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<Real> entry(-1.0, 1.0);

    for (int trial = 0; trial < 25; ++trial) {
        const Index n = 4;
        const Matrix m = random_spectrum_matrix(rng, n);
        Matrix dir(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) dir(i, j) = entry(rng);

        const Eigenstructure base = eigendecompose(m);
        const Real h = 1e-6;
        Eigenstructure plus = eigendecompose(m + h * dir);
        Eigenstructure minus = eigendecompose(m - h * dir);
        const auto map_p = match_eigenpairs(base, plus);
        const auto map_m = match_eigenpairs(base, minus);

        const EigvecDerivatives evd = eigenvector_derivatives(dir, base);
        for (Index i = 0; i < n; ++i) {
            const Vector fd_u = (plus.U.col(map_p[static_cast<std::size_t>(i)]) -
                                 minus.U.col(map_m[static_cast<std::size_t>(i)])) /
                                (2.0 * h);
            const Real scale = std::max(1.0, fd_u.norm());
            REQUIRE((evd.dU.col(i) - fd_u).norm() / scale < 1e-4);

            const Vector fd_v = (plus.V.col(map_p[static_cast<std::size_t>(i)]) -
                                 minus.V.col(map_m[static_cast<std::size_t>(i)])) /
                                (2.0 * h);
            const Real scale_v = std::max(1.0, fd_v.norm());
            REQUIRE((evd.dV.col(i) - fd_v).norm() / scale_v < 1e-4);
        }
    }
}

TEST_CASE("eigenvector derivatives preserve the normalizations", "[eigen_derivatives]") {
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<Real> entry(-1.0, 1.0);
    const Index n = 5;
    const Matrix m = random_spectrum_matrix(rng, n);
    Matrix dir(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) dir(i, j) = entry(rng);

    const Eigenstructure es = eigendecompose(m);
    const EigvecDerivatives evd = eigenvector_derivatives(dir, es);

    for (Index i = 0; i < n; ++i) {
        // d/dp (v_i' u_i) = 0
        const Real d_biortho = evd.dV.col(i).dot(es.U.col(i)) + es.V.col(i).dot(evd.dU.col(i));
        REQUIRE(d_biortho == Approx(0.0).margin(1e-8));
        // d/dp (u_i' u_i) = 0 under the unit-norm convention
        REQUIRE(2.0 * es.U.col(i).dot(evd.dU.col(i)) == Approx(0.0).margin(1e-8));
    }
}

TEST_CASE("coefficient antisymmetry between left and right expansions",
          "[eigen_derivatives]") {
    std::mt19937_64 rng(109);
    const Index n = 4;
    const Matrix m = random_spectrum_matrix(rng, n);
    std::uniform_real_distribution<Real> entry(-1.0, 1.0);
    Matrix dir(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) dir(i, j) = entry(rng);

    const Eigenstructure es = eigendecompose(m);
    const EigvecDerivatives evd = eigenvector_derivatives(dir, es);

    // Recover the expansion coefficients and check beta = -alpha'.
    // alpha(i, k) = v_k' du_i; beta(i, k) = u_k-weight of dv_i in the V basis.
    Matrix alpha(n, n), beta(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < n; ++k) {
            alpha(i, k) = es.V.col(k).dot(evd.dU.col(i));
            beta(i, k) = es.U.col(k).dot(evd.dV.col(i));
        }
    }
    REQUIRE((beta + alpha.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("network Jacobian eigenvalue sensitivity matches finite differences",
          "[eigen_derivatives]") {
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const Vector x = sc.initial.x;
    Vector y = sc.initial.y;

    const Eigenstructure base = eigendecompose(jacobian_y(x, y, sc.pre_fault));
    for (Index k = 0; k < y.size(); ++k) {
        const Matrix dm = dyg_dy(y, sc.pre_fault, k);
        const Real analytic = eigenvalue_derivative(dm, base, 0);

        const Real h = 1e-6;
        Vector yp = y, ym = y;
        yp[k] += h;
        ym[k] -= h;
        Eigenstructure plus = eigendecompose(jacobian_y(x, yp, sc.pre_fault));
        Eigenstructure minus = eigendecompose(jacobian_y(x, ym, sc.pre_fault));
        const auto map_p = match_eigenpairs(base, plus);
        const auto map_m = match_eigenpairs(base, minus);
        const Real fd =
            (plus.lambdas[map_p[0]] - minus.lambdas[map_m[0]]) / (2.0 * h);
        REQUIRE(analytic == Approx(fd).margin(1e-6 * std::max(1.0, std::abs(fd))));
    }
}
