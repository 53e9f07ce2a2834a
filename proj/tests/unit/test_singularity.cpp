#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

#include "vstab/singularity.hpp"

using namespace vstab;
using namespace vstab::test;
using Catch::Approx;

TEST_CASE("constant-impedance fixture stays away from the singular surface",
          "[singularity]") {
    // No constant-power load: the constraint Jacobian is constant and
    // invertible, so the indicator is state-independent and bounded away
    // from zero.
    std::mt19937_64 rng(51);
    auto built = load_fixture("smib.json");
    const Scenario& sc = built.scenario;
    const Real base = singularity_indicator(sc.initial.x, sc.initial.y, sc.pre_fault);
    REQUIRE(std::abs(base) > 0.1);
    for (int trial = 0; trial < 10; ++trial) {
        const SystemState st = perturb_state(rng, sc.initial, 0.1);
        REQUIRE(singularity_indicator(st.x, st.y, sc.pre_fault) == Approx(base).margin(1e-12));
    }
}

TEST_CASE("indicator magnitude decreases monotonically along the collapse run",
          "[singularity]") {
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const Trajectory traj = simulate(sc);
    REQUIRE(traj.termination == Termination::SingularSurface);

    bool past_step = false;
    Real prev = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] < sc.fault_start + 1e-12) continue;
        if (past_step) REQUIRE(std::abs(traj.lambda1[k]) <= std::abs(prev) + 1e-9);
        prev = traj.lambda1[k];
        past_step = true;
    }
    REQUIRE(std::abs(traj.lambda1.back()) < 0.1);
}

TEST_CASE("eigenvalue product tracks the determinant sign", "[singularity]") {
    std::mt19937_64 rng(53);
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    for (int trial = 0; trial < 10; ++trial) {
        const SystemState st = perturb_state(rng, sc.initial, 0.05);
        const Matrix dyg = jacobian_y(st.x, st.y, sc.pre_fault);
        const Eigenstructure es = eigendecompose(dyg);
        Real sign_prod = 1.0;
        for (Index i = 0; i < es.size(); ++i) sign_prod *= es.lambdas[i] > 0.0 ? 1.0 : -1.0;
        const Real det = dyg.partialPivLu().determinant();
        REQUIRE(sign_prod * det > 0.0);
    }
}

TEST_CASE("pseudo-equilibrium residuals at an operating point", "[singularity]") {
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const Thresholds th;
    const PseudoEquilibriumResidual r =
        pseudo_equilibrium_residual(sc.initial.x, sc.initial.y, sc.pre_fault, sc.devices, th);
    // on the constraint set but far from the surface: not a surface point
    REQUIRE(r.g_norm < th.eps_g);
    REQUIRE(std::abs(r.lambda1) > 100.0 * th.eps_sing);
    // kappa is linear in f, and f vanishes at the equilibrium
    REQUIRE(r.kappa_norm < 1e-7);
}

TEST_CASE("tangency scalar vanishes without constant-power loads", "[singularity]") {
    auto built = load_fixture("smib.json");
    const Scenario& sc = built.scenario;
    Real approx = 1.0;
    const Real exact = semi_singular_scalar(sc.initial.x, sc.initial.y, sc.pre_fault, {}, &approx);
    REQUIRE(exact == 0.0);
    REQUIRE(approx == 0.0);
}

TEST_CASE("tangency scalar matches the directional derivative of the indicator",
          "[singularity]") {
    std::mt19937_64 rng(57);
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;

    for (int trial = 0; trial < 5; ++trial) {
        const SystemState st = perturb_state(rng, sc.initial, 0.04);
        const Eigenstructure base = eigendecompose(jacobian_y(st.x, st.y, sc.pre_fault));
        const Real scalar = semi_singular_scalar(st.x, st.y, sc.pre_fault);

        const Real h = 1e-6;
        Eigenstructure plus =
            eigendecompose(jacobian_y(st.x, st.y + h * base.u1(), sc.pre_fault));
        Eigenstructure minus =
            eigendecompose(jacobian_y(st.x, st.y - h * base.u1(), sc.pre_fault));
        const auto map_p = match_eigenpairs(base, plus);
        const auto map_m = match_eigenpairs(base, minus);
        const Real fd = (plus.lambdas[map_p[0]] - minus.lambdas[map_m[0]]) / (2.0 * h);
        REQUIRE(scalar == Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("classification at an operating point is Regular", "[singularity]") {
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const SingularityReport rep =
        classify(sc.initial.x, sc.initial.y, sc.pre_fault, sc.devices);
    REQUIRE(rep.classification == SingularityClass::Regular);
}

TEST_CASE("surface-contact point of a collapse run classifies as generic singular",
          "[singularity]") {
    auto built = load_fixture("smlb.json");
    const Scenario& sc = built.scenario;
    const Trajectory traj = simulate(sc);
    const SingularHit hit = detect_singular_hit(traj, sc);
    const PowerNetwork& net = sc.network_at(hit.t_hit);

    const SingularityReport rep = classify(hit.z_sp.x, hit.z_sp.y, net, sc.devices);
    REQUIRE(rep.classification == SingularityClass::SingularGeneric);
    REQUIRE(std::abs(rep.lambda1) < Thresholds{}.eps_sing * 100);
}

TEST_CASE("near-singular surface samples", "[singularity][sampling]") {
    const Thresholds th;
    auto built = load_fixture("smlb.json");
    const auto samples = sample_near_singular(built, 20, 71, th);
    const PowerNetwork& net = built.scenario.post_fault;  // stepped-load network

    SECTION("tangency scalar is bounded away from zero with constant sign") {
        int n_pos = 0, n_neg = 0;
        for (const auto& z : samples) {
            const Real s = semi_singular_scalar(z.x, z.y, net, th);
            REQUIRE(std::abs(s) > th.eps_xi);
            (s > 0.0 ? n_pos : n_neg)++;
        }
        REQUIRE((n_pos == 0 || n_neg == 0));
    }

    SECTION("the critical eigenvector concentrates on the real-part block") {
        // X/R = 10 in this fixture, so the voltage-mode eigenvector lives in
        // the first block of the algebraic coordinates.
        const Index nb = net.n_bus();
        for (const auto& z : samples) {
            const Eigenstructure es = eigendecompose(jacobian_y(z.x, z.y, net, th), th);
            const Real nx = es.u1().head(nb).norm();
            const Real ny = es.u1().tail(nb).norm();
            REQUIRE(nx >= 5.0 * ny);
        }
    }
}
