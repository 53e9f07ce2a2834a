#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

#include "vstab/device_dynamics.hpp"
#include "vstab/simulator.hpp"

using namespace vstab;
using namespace vstab::test;
using Catch::Approx;

namespace {

constexpr Real kOmega0 = 2.0 * M_PI * 60.0;

Device make_machine(const std::string& name, Index bus, MachineParams p) {
    Device d;
    d.name = name;
    d.bus = bus;
    d.params = p;
    return d;
}

Device make_gfm(const std::string& name, Index bus, GfmParams p) {
    Device d;
    d.name = name;
    d.bus = bus;
    d.params = p;
    return d;
}

}  // namespace

TEST_CASE("hand-balanced machine point zeroes every equation", "[device_dynamics]") {
    MachineParams p;
    p.M = 7.0;
    p.D = 1.5;
    p.Td0 = 6.0;
    p.xd = 1.8;
    p.xdp = 0.3;
    p.Ta = 0.2;
    p.Ka = 50.0;

    const Real delta = 0.3, emf = 1.1;
    const Real vgx = 0.95, vgy = 0.1;
    Device dev = make_machine("G", 0, p);
    const DeviceElectrical e = device_electrical(dev, delta, emf, vgx, vgy);

    // Balance each sub-equation analytically.
    p.Pm = e.pe;
    const Real efd = emf + (p.xd - p.xdp) * e.id;
    p.Vref = e.vmag + efd / p.Ka;
    dev.params = p;

    Vector x(4);
    x << delta, 0.0, emf, efd;
    Vector y(2);
    y << vgx, vgy;
    const Vector f = f_eval(x, y, {dev}, kOmega0);
    REQUIRE(f.lpNorm<Eigen::Infinity>() == Approx(0.0).margin(1e-13));
}

TEST_CASE("reduced single-machine model: acceleration follows 0.5 - sin(delta)",
          "[device_dynamics]") {
    // Frozen-flux machine against a stiff source with E1 E2 / X = 1, Pm = 0.5,
    // D = 0: the equilibrium separation is asin(0.5) and the swing equation
    // reduces to M wdot = 0.5 - sin(delta).
    MachineParams m1;
    m1.M = 7.0;
    m1.D = 0.0;
    m1.Td0 = 1e12;
    m1.xd = m1.xdp = 0.3;
    m1.Ta = 1.0;
    m1.Ka = 0.0;
    m1.Pm = 0.5;
    MachineParams m2 = m1;
    m2.M = 1e6;
    m2.xd = m2.xdp = 0.05;
    m2.Pm = -0.5;

    // total reactance 0.3 + 0.2 + 0.05 = 0.55 = E1 E2, so peak transfer is 1
    const Real e1 = 1.1, e2 = 0.5;

    PowerNetwork net;
    net.n_gen = 2;
    net.n_load = 0;
    ComplexMatrix y(2, 2);
    const Complex yl = 1.0 / Complex(0.0, 0.2);
    y(0, 0) = yl + 1.0 / Complex(0.0, 0.3);
    y(1, 1) = yl + 1.0 / Complex(0.0, 0.05);
    y(0, 1) = y(1, 0) = -yl;
    net.B = y.imag();
    net.G = y.real();
    net.B_le = Matrix::Zero(2, 2);
    net.B_le(0, 0) = 1.0 / 0.3;
    net.B_le(1, 1) = 1.0 / 0.05;
    net.P = net.Q = net.rho = Vector::Zero(2);
    net.yz_diag = ComplexVector::Zero(2);
    net.omega0 = kOmega0;

    DeviceSet devices = {make_machine("G1", 0, m1), make_machine("IB", 1, m2)};
    const StateLayout l = net.layout();

    auto swing_accel = [&](Real d12) {
        Vector x(8);
        x << d12, 0.0, 0.0, 0.0, e1, e2, 0.0, 0.0;
        Vector y_guess(4);
        y_guess << 1.0, 1.0, 0.0, 0.0;
        const Vector ysol = solve_algebraic(x, y_guess, net);
        const Vector f = f_eval(x, ysol, devices, kOmega0);
        return f[l.omega_off()] * m1.M;
    };

    REQUIRE(swing_accel(std::asin(0.5)) == Approx(0.0).margin(1e-12));
    for (Real d : {0.1, 0.4, 0.9, 1.4}) {
        REQUIRE(swing_accel(d) == Approx(0.5 - std::sin(d)).epsilon(1e-10));
    }
}

TEST_CASE("fixture initial conditions are equilibria", "[device_dynamics]") {
    for (const auto* name : {"smib.json", "smlb.json"}) {
        auto built = load_fixture(name);
        const Scenario& sc = built.scenario;
        const Real f_res = f_eval(sc.initial.x, sc.initial.y, sc.devices, sc.pre_fault.omega0)
                               .lpNorm<Eigen::Infinity>();
        const Real g_res = algebraic_residual(sc.initial.x, sc.initial.y, sc.pre_fault)
                               .lpNorm<Eigen::Infinity>();
        INFO(name);
        REQUIRE(f_res < 1e-8);
        REQUIRE(g_res < 1e-8);
    }
}

TEST_CASE("f_jacobian matches finite differences", "[device_dynamics]") {
    std::mt19937_64 rng(5);
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const Index nb = sc.pre_fault.n_bus();

    for (int trial = 0; trial < 10; ++trial) {
        const SystemState st = perturb_state(rng, sc.initial, 0.05);
        const FJacobian j = f_jacobian(st.x, st.y, sc.devices, nb, sc.pre_fault.omega0);

        const Matrix fd_x = fd_jacobian([&](const Vector& xv) {
            return f_eval(xv, st.y, sc.devices, sc.pre_fault.omega0);
        }, st.x);
        const Matrix fd_y = fd_jacobian([&](const Vector& yv) {
            return f_eval(st.x, yv, sc.devices, sc.pre_fault.omega0);
        }, st.y);
        REQUIRE(max_rel_error(j.dfdx, fd_x) < 1e-6);
        REQUIRE(max_rel_error(j.dfdy, fd_y) < 1e-6);
    }
}

TEST_CASE("gfm jacobian matches finite differences", "[device_dynamics]") {
    GfmParams p;
    p.M = 4.0;
    p.D = 30.0;
    p.Ki = 0.5;
    p.Tu = 0.05;
    p.Kq = 0.2;
    p.xl = 0.15;
    p.Pref = 0.4;
    p.Qref = 0.1;
    p.Vref = 1.0;
    const DeviceSet devices = {make_gfm("C1", 0, p)};

    std::mt19937_64 rng(9);
    std::normal_distribution<Real> d(0.0, 0.1);
    for (int trial = 0; trial < 10; ++trial) {
        Vector x(4), y(2);
        x << 0.2 + d(rng), d(rng) * 0.01, 1.02 + d(rng), d(rng) * 0.1;
        y << 0.98 + d(rng), 0.05 + d(rng);

        const FJacobian j = f_jacobian(x, y, devices, 1, kOmega0);
        const Matrix fd_x = fd_jacobian([&](const Vector& xv) {
            return f_eval(xv, y, devices, kOmega0);
        }, x);
        const Matrix fd_y = fd_jacobian([&](const Vector& yv) {
            return f_eval(x, yv, devices, kOmega0);
        }, y);
        REQUIRE(max_rel_error(j.dfdx, fd_x) < 1e-6);
        REQUIRE(max_rel_error(j.dfdy, fd_y) < 1e-6);
    }
}

TEST_CASE("delta rows of df/dx are the frequency coupling", "[device_dynamics]") {
    auto built = load_fixture("smib.json");
    const Scenario& sc = built.scenario;
    const StateLayout l = sc.layout();
    const FJacobian j =
        f_jacobian(sc.initial.x, sc.initial.y, sc.devices, l.n_bus, sc.pre_fault.omega0);

    for (Index i = 0; i < l.n_dev; ++i) {
        Vector row = j.dfdx.row(l.delta_off() + i);
        REQUIRE(row[l.omega_off() + i] == Approx(sc.pre_fault.omega0));
        row[l.omega_off() + i] = 0.0;
        REQUIRE(row.norm() == 0.0);
        REQUIRE(j.dfdy.row(l.delta_off() + i).norm() == 0.0);
    }
}

TEST_CASE("zero EMF removes the electrical coupling of the swing equation",
          "[device_dynamics]") {
    MachineParams p;
    p.M = 7.0;
    Device dev = make_machine("G", 0, p);
    Vector x(4), y(2);
    x << 0.4, 0.0, 0.0, 1.0;  // E' = 0
    y << 1.0, 0.1;
    const FJacobian j = f_jacobian(x, y, {dev}, 1, kOmega0);
    REQUIRE(j.dfdy(1, 0) == 0.0);
    REQUIRE(j.dfdy(1, 1) == 0.0);
}

TEST_CASE("uniform rotation of angles and voltages leaves f invariant",
          "[device_dynamics][property]") {
    std::mt19937_64 rng(13);
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const StateLayout l = sc.layout();

    for (int trial = 0; trial < 20; ++trial) {
        const SystemState st = perturb_state(rng, sc.initial, 0.05);
        std::uniform_real_distribution<Real> phi_dist(-M_PI, M_PI);
        const Real phi = phi_dist(rng);

        SystemState rot = st;
        for (Index i = 0; i < l.n_dev; ++i) rot.x[l.delta_off() + i] += phi;
        const Real c = std::cos(phi), s = std::sin(phi);
        for (Index k = 0; k < l.n_bus; ++k) {
            const Real vx = st.y[k], vy = st.y[l.n_bus + k];
            rot.y[k] = vx * c - vy * s;
            rot.y[l.n_bus + k] = vx * s + vy * c;
        }

        const Vector f0 = f_eval(st.x, st.y, sc.devices, sc.pre_fault.omega0);
        const Vector f1 = f_eval(rot.x, rot.y, sc.devices, sc.pre_fault.omega0);
        REQUIRE((f1 - f0).lpNorm<Eigen::Infinity>() < 1e-12);

        // the constraint residual norm is invariant as well
        const Real g0 = algebraic_residual(st.x, st.y, sc.pre_fault).norm();
        const Real g1 = algebraic_residual(rot.x, rot.y, sc.pre_fault).norm();
        REQUIRE(g1 == Approx(g0).margin(1e-11));
    }
}

TEST_CASE("terminal voltage floor guards the exciter path", "[device_dynamics]") {
    MachineParams p;
    Device dev = make_machine("G", 0, p);
    Vector x(4), y(2);
    x << 0.0, 0.0, 1.0, 1.0;
    y << 1e-4, 0.0;
    REQUIRE_THROWS_AS(f_eval(x, y, {dev}, kOmega0), VoltageCollapseGuard);
}
