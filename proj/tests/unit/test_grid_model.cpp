#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

#include "vstab/grid_model.hpp"

using namespace vstab;
using namespace vstab::test;
using Catch::Approx;

namespace {

ComplexMatrix chain3(Complex y12, Complex y23) {
    ComplexMatrix y = ComplexMatrix::Zero(3, 3);
    y(0, 0) = y12;
    y(1, 1) = y12 + y23;
    y(2, 2) = y23;
    y(0, 1) = y(1, 0) = -y12;
    y(1, 2) = y(2, 1) = -y23;
    return y;
}

}  // namespace

TEST_CASE("kron_reduce with nothing to eliminate is the identity", "[grid_model]") {
    ComplexMatrix y(2, 2);
    y << Complex(1.0, -5.0), Complex(-1.0, 5.0), Complex(-1.0, 5.0), Complex(1.0, -4.8);
    const ComplexMatrix red = kron_reduce(y, {0, 1});
    REQUIRE((red - y).norm() == Approx(0.0).margin(1e-15));
}

TEST_CASE("kron_reduce of a 3-bus chain matches the series combination", "[grid_model]") {
    const Complex y12(0.4, -4.0), y23(0.2, -2.5);
    const ComplexMatrix red = kron_reduce(chain3(y12, y23), {0, 2});
    const Complex expected = -y12 * y23 / (y12 + y23);
    REQUIRE(std::abs(red(0, 1) - expected) < 1e-12);
    REQUIRE(std::abs(red(1, 0) - expected) < 1e-12);

    // Direct linear-solve check: currents at retained buses must match.
    const ComplexMatrix full = chain3(y12, y23);
    ComplexVector v_r(2);
    v_r << Complex(1.02, 0.03), Complex(0.97, -0.08);
    const Complex v_e = -(full(1, 0) * v_r[0] + full(1, 2) * v_r[1]) / full(1, 1);
    ComplexVector i_full(2);
    i_full[0] = full(0, 0) * v_r[0] + full(0, 1) * v_e + full(0, 2) * v_r[1];
    i_full[1] = full(2, 0) * v_r[0] + full(2, 1) * v_e + full(2, 2) * v_r[1];
    const ComplexVector i_red = red * v_r;
    REQUIRE((i_full - i_red).norm() < 1e-12);
}

TEST_CASE("kron_reduce preserves retained-bus currents on a random network", "[grid_model]") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<Real> xdist(0.05, 0.4);

    // Random connected 6-bus network: ring plus chords, small shunts.
    const Index n = 6;
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    auto add_line = [&](Index a, Index b) {
        const Complex ys = 1.0 / Complex(0.1 * xdist(rng), xdist(rng));
        y(a, a) += ys;
        y(b, b) += ys;
        y(a, b) -= ys;
        y(b, a) -= ys;
    };
    for (Index i = 0; i < n; ++i) add_line(i, (i + 1) % n);
    add_line(0, 3);
    add_line(1, 4);
    for (Index i = 0; i < n; ++i) y(i, i) += Complex(0.0, 0.02);

    const std::vector<Index> retained = {0, 1, 2, 5};
    const std::vector<Index> eliminated = {3, 4};
    const ComplexMatrix red = kron_reduce(y, retained);

    std::uniform_real_distribution<Real> vr(0.9, 1.1), va(-0.3, 0.3);
    for (int trial = 0; trial < 10; ++trial) {
        ComplexVector v = ComplexVector::Zero(n);
        for (Index r : retained) v[r] = std::polar(vr(rng), va(rng));

        // Zero injection at eliminated buses fixes their voltages.
        ComplexMatrix yee(2, 2);
        ComplexVector rhs(2);
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) yee(a, b) = y(eliminated[a], eliminated[b]);
            rhs[a] = 0.0;
            for (Index r : retained) rhs[a] -= y(eliminated[a], r) * v[r];
        }
        const ComplexVector ve = yee.partialPivLu().solve(rhs);
        v[eliminated[0]] = ve[0];
        v[eliminated[1]] = ve[1];

        const ComplexVector i_full = y * v;
        ComplexVector v_red(retained.size());
        for (std::size_t k = 0; k < retained.size(); ++k) v_red[k] = v[retained[k]];
        const ComplexVector i_red = red * v_red;
        for (std::size_t k = 0; k < retained.size(); ++k) {
            REQUIRE(std::abs(i_full[retained[k]] - i_red[k]) < 1e-10);
        }
    }
}

TEST_CASE("kron_reduce rejects a singular eliminated block", "[grid_model]") {
    ComplexMatrix y = ComplexMatrix::Zero(3, 3);
    y(0, 0) = Complex(0.0, -4.0);
    // bus 2 fully disconnected: eliminated block is singular
    REQUIRE_THROWS_AS(kron_reduce(y, {0, 1}), SingularElimination);
}

TEST_CASE("constant-impedance loads follow the load-split formula", "[grid_model]") {
    SECTION("all constant power leaves no impedance part") {
        ComplexVector s(2);
        s << Complex(-1.0, -0.4), Complex(-2.0, 0.1);
        Vector rho(2);
        rho << 1.0, 1.0;
        ComplexVector v0(2);
        v0 << Complex(1.0, 0.0), Complex(0.97, -0.05);
        const ComplexVector yz = constant_impedance_loads(s, rho, v0);
        REQUIRE(yz.norm() == Approx(0.0).margin(1e-16));
    }
    SECTION("unit voltage, no constant-power fraction") {
        ComplexVector s(1);
        s << Complex(1.0, 0.5);
        Vector rho = Vector::Zero(1);
        ComplexVector v0(1);
        v0 << Complex(1.0, 0.0);
        const ComplexVector yz = constant_impedance_loads(s, rho, v0);
        REQUIRE(yz[0].real() == Approx(1.0));
        REQUIRE(yz[0].imag() == Approx(-0.5));
    }
    SECTION("partial split against a hand-computed value") {
        // (1 - 0.4) * conj(2 + 1i) / 0.95^2, angle of the base voltage is irrelevant
        ComplexVector s(1);
        s << Complex(2.0, 1.0);
        Vector rho(1);
        rho << 0.4;
        ComplexVector v0(1);
        v0 << std::polar(0.95, -5.0 * M_PI / 180.0);
        const ComplexVector yz = constant_impedance_loads(s, rho, v0);
        REQUIRE(yz[0].real() == Approx(1.3296398891966759).epsilon(1e-12));
        REQUIRE(yz[0].imag() == Approx(-0.66481994459833795).epsilon(1e-12));
    }
    SECTION("zero base voltage is rejected") {
        ComplexVector s(1);
        s << Complex(1.0, 0.0);
        Vector rho = Vector::Zero(1);
        ComplexVector v0 = ComplexVector::Zero(1);
        REQUIRE_THROWS_AS(constant_impedance_loads(s, rho, v0), ZeroBaseVoltage);
    }
}

namespace {

// Minimal hand-built two-bus network: one device bus, one load bus.
PowerNetwork two_bus_net(Real p_load, Real q_load, Real rho) {
    PowerNetwork net;
    net.n_gen = 1;
    net.n_load = 1;
    const Complex y_line = 1.0 / Complex(0.02, 0.2);
    const Complex y_mach = 1.0 / Complex(0.0, 0.3);
    ComplexMatrix y(2, 2);
    y(0, 0) = y_line + y_mach;
    y(1, 1) = y_line;
    y(0, 1) = y(1, 0) = -y_line;
    const Complex s_inj = -Complex(p_load, q_load);
    y(1, 1) -= (1.0 - rho) * std::conj(s_inj);  // |V0| = 1
    net.B = y.imag();
    net.G = y.real();
    net.B_le = Matrix::Zero(2, 1);
    net.B_le(0, 0) = 1.0 / 0.3;
    net.P = Vector::Zero(2);
    net.Q = Vector::Zero(2);
    net.P[1] = rho * s_inj.real();
    net.Q[1] = rho * s_inj.imag();
    net.rho = Vector::Zero(2);
    net.rho[1] = rho;
    net.yz_diag = ComplexVector::Zero(2);
    net.yz_diag[1] = (1.0 - rho) * std::conj(s_inj);
    return net;
}

Vector state_x(Real delta, Real emf) {
    Vector x(4);
    x << delta, 0.0, emf, 1.0;
    return x;
}

}  // namespace

TEST_CASE("algebraic residual vanishes with no injections", "[grid_model]") {
    PowerNetwork net = two_bus_net(0.0, 0.0, 0.0);
    const Vector x = state_x(0.2, 0.0);  // zero EMF: no device current
    const Vector g = algebraic_residual(x, Vector::Zero(4), net);
    REQUIRE(g.norm() == Approx(0.0).margin(1e-15));
}

TEST_CASE("jacobian_y matches the constant block form without constant-power load",
          "[grid_model]") {
    PowerNetwork net = two_bus_net(1.0, 0.3, 0.0);  // all constant impedance
    const Vector x = state_x(0.3, 1.1);
    Vector y1(4), y2(4);
    y1 << 1.0, 0.9, 0.0, -0.1;
    y2 << 0.7, 0.6, 0.2, 0.1;
    const Matrix j1 = jacobian_y(x, y1, net);
    const Matrix j2 = jacobian_y(x, y2, net);
    REQUIRE((j1 - j2).norm() == Approx(0.0).margin(1e-15));
    REQUIRE((j1.topLeftCorner(2, 2) - net.B).norm() == Approx(0.0).margin(1e-15));
    REQUIRE((j1.topRightCorner(2, 2) - net.G).norm() == Approx(0.0).margin(1e-15));
    REQUIRE((j1.bottomLeftCorner(2, 2) - net.G).norm() == Approx(0.0).margin(1e-15));
    REQUIRE((j1.bottomRightCorner(2, 2) + net.B).norm() == Approx(0.0).margin(1e-15));
}

TEST_CASE("load diagonals at unit voltage match hand substitution", "[grid_model]") {
    // Consumption 1 + 0.5i at V = 1 + 0i: stored injection is the negative, so
    // the b-diagonal evaluates to -0.5 and the g-diagonal to -1.
    PowerNetwork net = two_bus_net(1.0, 0.5, 1.0);
    const Vector x = state_x(0.0, 1.0);
    Vector y(4);
    y << 1.0, 1.0, 0.0, 0.0;
    const Matrix j = jacobian_y(x, y, net);
    const Real b_entry = net.B(1, 1) - j(1, 1);
    const Real g_entry = net.G(1, 1) - j(1, 3);
    REQUIRE(b_entry == Approx(-0.5).epsilon(1e-14));
    REQUIRE(g_entry == Approx(-1.0).epsilon(1e-14));
    // magnitude equals the load magnitudes at unit voltage
    REQUIRE(std::abs(b_entry) == Approx(-net.Q[1]).epsilon(1e-14));
    REQUIRE(std::abs(g_entry) == Approx(-net.P[1]).epsilon(1e-14));
}

TEST_CASE("jacobian_y matches finite differences of the residual", "[grid_model]") {
    std::mt19937_64 rng(7);
    PowerNetwork net = two_bus_net(1.2, 0.4, 0.6);
    const Vector x = state_x(0.25, 1.08);
    Vector y0(4);
    y0 << 1.0, 0.95, -0.02, -0.12;

    for (int trial = 0; trial < 5; ++trial) {
        Vector y = y0;
        std::normal_distribution<Real> d(0.0, 0.05);
        for (Index i = 0; i < 4; ++i) y[i] += d(rng);
        const Matrix analytic = jacobian_y(x, y, net);
        const Matrix fd = fd_jacobian([&](const Vector& yv) {
            return algebraic_residual(x, yv, net);
        }, y);
        REQUIRE(max_rel_error(analytic, fd) < 1e-6);
    }
}

TEST_CASE("jacobian_x matches finite differences and has exact zero columns", "[grid_model]") {
    std::mt19937_64 rng(11);
    PowerNetwork net = two_bus_net(1.2, 0.4, 0.6);
    Vector y(4);
    y << 1.0, 0.95, -0.02, -0.12;

    for (int trial = 0; trial < 5; ++trial) {
        std::normal_distribution<Real> d(0.0, 0.2);
        const Vector x = state_x(0.25 + d(rng), 1.05 + 0.3 * d(rng));
        const Matrix analytic = jacobian_x(x, y, net);
        const Matrix fd = fd_jacobian([&](const Vector& xv) {
            return algebraic_residual(xv, y, net);
        }, x);
        REQUIRE(max_rel_error(analytic, fd) < 1e-6);
        // omega and Efd columns identically zero
        REQUIRE(analytic.col(1).norm() == 0.0);
        REQUIRE(analytic.col(3).norm() == 0.0);
    }
}

TEST_CASE("jacobian_x trivial structure", "[grid_model]") {
    PowerNetwork net = two_bus_net(0.8, 0.2, 0.5);
    Vector y(4);
    y << 1.0, 1.0, 0.0, 0.0;

    SECTION("zero EMF kills the delta column") {
        const Matrix j = jacobian_x(state_x(0.4, 0.0), y, net);
        REQUIRE(j.col(0).norm() == 0.0);
    }
    SECTION("at delta = 0 the E column is the EMF coupling") {
        const Matrix j = jacobian_x(state_x(0.0, 1.0), y, net);
        REQUIRE((j.col(2).head(2) - net.B_le.col(0)).norm() == Approx(0.0).margin(1e-15));
        REQUIRE(j.col(2).tail(2).norm() == Approx(0.0).margin(1e-15));
    }
}

TEST_CASE("voltage floor guards constant-power evaluation", "[grid_model]") {
    PowerNetwork net = two_bus_net(1.0, 0.3, 1.0);
    const Vector x = state_x(0.2, 1.0);
    Vector y(4);
    y << 1.0, 1e-4, 0.0, 1e-4;  // load bus voltage below the floor
    REQUIRE_THROWS_AS(algebraic_residual(x, y, net), VoltageCollapseGuard);
    REQUIRE_THROWS_AS(jacobian_y(x, y, net), VoltageCollapseGuard);

    // the same magnitudes are fine at a bus with no constant-power load
    PowerNetwork no_cp = two_bus_net(1.0, 0.3, 0.0);
    Vector g;
    REQUIRE_NOTHROW(g = algebraic_residual(x, y, no_cp));
}

TEST_CASE("derivatives of the y-Jacobian match finite differences", "[grid_model]") {
    PowerNetwork net = two_bus_net(1.2, 0.4, 0.6);
    const Vector x = state_x(0.25, 1.08);
    Vector y(4);
    y << 1.0, 0.93, -0.02, -0.14;

    for (Index k = 0; k < 4; ++k) {
        const Matrix analytic = dyg_dy(y, net, k);
        const Matrix fd = fd_jacobian([&](const Vector& yv) {
            const Matrix m = jacobian_y(x, yv, net);
            return Vector(Eigen::Map<const Vector>(m.data(), m.size()));
        }, y).col(k).reshaped(4, 4);
        REQUIRE(max_rel_error(analytic, Matrix(fd)) < 1e-6);
    }

    // bilinear form agrees with the dense derivative
    std::mt19937_64 rng(3);
    std::normal_distribution<Real> d(0.0, 1.0);
    Vector u(4), v(4);
    for (Index i = 0; i < 4; ++i) {
        u[i] = d(rng);
        v[i] = d(rng);
    }
    for (Index k = 0; k < 4; ++k) {
        const Real direct = v.dot(dyg_dy(y, net, k) * u);
        REQUIRE(dyg_dy_bilinear(y, net, k, v, u) == Approx(direct).margin(1e-14));
    }
}

TEST_CASE("derivatives of the x-Jacobian match finite differences", "[grid_model]") {
    PowerNetwork net = two_bus_net(1.2, 0.4, 0.6);
    const Vector x = state_x(0.35, 1.1);
    Vector y(4);
    y << 1.0, 0.93, -0.02, -0.14;
    Vector f(4);
    f << 0.3, -0.1, 0.2, 0.05;

    for (Index k = 0; k < 4; ++k) {
        const Matrix analytic = dxg_dx(x, net, k);
        const Matrix fd = fd_jacobian([&](const Vector& xv) {
            const Matrix m = jacobian_x(xv, y, net);
            return Vector(Eigen::Map<const Vector>(m.data(), m.size()));
        }, x).col(k).reshaped(4, 4);
        REQUIRE(max_rel_error(analytic, Matrix(fd)) < 1e-6);
        REQUIRE((dxg_dx_apply(x, net, k, f) - analytic * f).norm() < 1e-14);
    }
}
