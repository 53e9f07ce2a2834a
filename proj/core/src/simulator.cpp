#include "vstab/simulator.hpp"

#include "vstab/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <future>

namespace vstab {

std::string to_string(Termination t) {
    switch (t) {
        case Termination::Completed: return "Completed";
        case Termination::SingularSurface: return "SingularSurface";
        case Termination::Divergence: return "Divergence";
        case Termination::GuardTripped: return "GuardTripped";
    }
    return "Unknown";
}

Vector solve_algebraic(const Vector& x, const Vector& y_guess, const PowerNetwork& net,
                       const Thresholds& th, int* iterations_out) {
    Vector y = y_guess;
    for (int it = 0; it <= 50; ++it) {
        const Vector g = algebraic_residual(x, y, net, th);
        if (g.lpNorm<Eigen::Infinity>() < th.eps_alg) {
            if (iterations_out != nullptr) *iterations_out = it;
            return y;
        }
        if (it == 50) break;
        const Matrix dyg = jacobian_y(x, y, net, th);
        const Vector step = dyg.partialPivLu().solve(g);
        if (!step.allFinite()) {
            throw AlgebraicNoConvergence("algebraic Newton step not finite");
        }
        y -= step;
    }
    throw AlgebraicNoConvergence("algebraic solve stalled after 50 iterations");
}

SystemState solve_equilibrium(const SystemState& guess, const PowerNetwork& net,
                              const DeviceSet& devices, const Thresholds& th) {
    // The model has no governors, so after a topology change the attractor is
    // a synchronized solution with one uniform frequency offset absorbing the
    // power imbalance.  Solve for it directly: the rotor-drift rows become
    // omega_i = omega_ss with omega_ss an unknown, and the rotation gauge is
    // pinned to the guess's first angle.
    const StateLayout l = net.layout();
    const Index n = l.n_diff(), m = l.n_alg();
    const Index nd = l.n_dev;
    Vector x = guess.x, y = guess.y;
    Real omega_ss = 0.0;
    const Real delta0_gauge = guess.x[l.delta_off()];

    auto residual = [&](const Vector& xv, const Vector& yv, Real oss) {
        Vector r(n + m + 1);
        const Vector f = f_eval(xv, yv, devices, net.omega0, th);
        for (Index i = 0; i < nd; ++i) r[i] = xv[l.omega_off() + i] - oss;
        r.segment(nd, 3 * nd) = f.segment(nd, 3 * nd);
        r.segment(n, m) = algebraic_residual(xv, yv, net, th);
        r[n + m] = xv[l.delta_off()] - delta0_gauge;
        return r;
    };

    Vector r = residual(x, y, omega_ss);
    for (int it = 0; it < 50; ++it) {
        if (r.lpNorm<Eigen::Infinity>() < 1e-12) return {x, y};
        const FJacobian fj = f_jacobian(x, y, devices, l.n_bus, net.omega0, th);
        Matrix jac = Matrix::Zero(n + m + 1, n + m + 1);
        for (Index i = 0; i < nd; ++i) {
            jac(i, l.omega_off() + i) = 1.0;
            jac(i, n + m) = -1.0;
        }
        jac.block(nd, 0, 3 * nd, n) = fj.dfdx.bottomRows(3 * nd);
        jac.block(nd, n, 3 * nd, m) = fj.dfdy.bottomRows(3 * nd);
        jac.block(n, 0, m, n) = jacobian_x(x, y, net);
        jac.block(n, n, m, m) = jacobian_y(x, y, net, th);
        jac(n + m, l.delta_off()) = 1.0;

        // Row equilibration: device time constants can differ by many orders
        // of magnitude (stiff frozen sources), which otherwise wrecks the LU.
        Vector rs = jac.cwiseAbs().rowwise().maxCoeff();
        for (Index i = 0; i < rs.size(); ++i) rs[i] = rs[i] > 0.0 ? 1.0 / rs[i] : 1.0;
        const Vector step = (rs.asDiagonal() * jac).partialPivLu().solve(rs.asDiagonal() * r);
        bool accepted = false;
        Real alpha = 1.0;
        for (int ls = 0; ls < 8; ++ls) {
            const Vector xn = x - alpha * step.head(n);
            const Vector yn = y - alpha * step.segment(n, m);
            const Real on = omega_ss - alpha * step[n + m];
            try {
                const Vector rn = residual(xn, yn, on);
                if (rn.norm() < r.norm() || rn.lpNorm<Eigen::Infinity>() < 1e-12) {
                    x = xn;
                    y = yn;
                    omega_ss = on;
                    r = rn;
                    accepted = true;
                    break;
                }
            } catch (const VoltageCollapseGuard&) {
                // shrink and retry
            }
            alpha *= 0.5;
        }
        if (!accepted) throw NoConvergence("equilibrium Newton line search failed");
    }
    if (r.lpNorm<Eigen::Infinity>() < 1e-12) return {x, y};
    throw NoConvergence("equilibrium Newton did not converge in 50 iterations");
}

namespace {

// Dormand-Prince embedded pair.
constexpr int kStages = 7;
constexpr Real kA[kStages][kStages] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr Real kB5[kStages] = {35.0 / 384,      0.0,         500.0 / 1113, 125.0 / 192,
                               -2187.0 / 6784,  11.0 / 84,   0.0};
constexpr Real kB4[kStages] = {5179.0 / 57600,  0.0,          7571.0 / 16695, 393.0 / 640,
                               -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

Real error_norm(const Vector& x_old, const Vector& x5, const Vector& err, Real atol, Real rtol) {
    Real e = 0.0;
    for (Index i = 0; i < err.size(); ++i) {
        const Real sc = atol + rtol * std::max(std::abs(x_old[i]), std::abs(x5[i]));
        e = std::max(e, std::abs(err[i]) / sc);
    }
    return e;
}

Real next_dt(Real dt, Real e) {
    const Real factor = e > 0.0 ? 0.9 * std::pow(e, -0.2) : 5.0;
    return dt * std::clamp(factor, 0.2, 5.0);
}

// Distance to the equilibrium in the symmetry-quotient metric: uniform angle
// shifts (with the matching voltage rotation) are dynamically neutral, so
// angles are compared relative to device 0.
Real eq_distance(const SystemState& st, const SystemState& sep, const StateLayout& l) {
    Real d = 0.0;
    for (Index i = 1; i < l.n_dev; ++i) {
        const Real rel = (st.x[l.delta_off() + i] - st.x[l.delta_off()]) -
                         (sep.x[l.delta_off() + i] - sep.x[l.delta_off()]);
        d = std::max(d, std::abs(rel));
    }
    for (Index i = 0; i < l.n_dev; ++i) {
        d = std::max(d, std::abs(st.x[l.omega_off() + i] - sep.x[l.omega_off() + i]));
        d = std::max(d, std::abs(st.x[l.e_off() + i] - sep.x[l.e_off() + i]));
        d = std::max(d, std::abs(st.x[l.efd_off() + i] - sep.x[l.efd_off() + i]));
    }
    return d;
}

}  // namespace

Trajectory simulate(const Scenario& sc, const SimOptions& opts) {
    const Thresholds& th = opts.thresholds;
    const StateLayout l = sc.layout();

    Vector x = sc.initial.x;
    Vector y = sc.initial.y;

    {
        const Real f0 = f_eval(x, y, sc.devices, sc.pre_fault.omega0, th).lpNorm<Eigen::Infinity>();
        const Real g0 = algebraic_residual(x, y, sc.pre_fault, th).lpNorm<Eigen::Infinity>();
        if (f0 > opts.init_residual_tol || g0 > opts.init_residual_tol) {
            throw InvalidInitialCondition("initial residuals ||f|| = " + std::to_string(f0) +
                                          ", ||g|| = " + std::to_string(g0) +
                                          " exceed the equilibrium tolerance");
        }
    }

    Trajectory traj;
    Vector prev_u1;

    auto record = [&](Real t, const PowerNetwork& net) {
        const Eigenstructure es = eigendecompose(jacobian_y(x, y, net, th), th,
                                                 prev_u1.size() > 0 ? &prev_u1 : nullptr);
        prev_u1 = es.u1();
        traj.times.push_back(t);
        traj.states.push_back({x, y});
        traj.lambda1.push_back(es.lambda1());
        traj.g_inf.push_back(algebraic_residual(x, y, net, th).lpNorm<Eigen::Infinity>());
    };

    // Event times partition the run into segments with a fixed network.  A
    // zero-duration fault is a pure step straight onto the post network.
    std::vector<Real> boundaries;
    if (sc.fault_start < sc.t_end) {
        boundaries.push_back(sc.fault_start);
        if (sc.fault_duration > 0.0 && sc.fault_start + sc.fault_duration < sc.t_end)
            boundaries.push_back(sc.fault_start + sc.fault_duration);
    }
    boundaries.push_back(sc.t_end);

    Real t = 0.0;
    record(0.0, sc.pre_fault);

    Real dt = std::min(sc.dt_max, 1e-3);
    Vector k[kStages];

    for (std::size_t seg = 0; seg < boundaries.size(); ++seg) {
        const Real t_stop = boundaries[seg];
        const PowerNetwork& net = sc.network_at(0.5 * (t + t_stop));

        if (seg > 0) {
            // Topology switch: re-solve the algebraic state on the new network.
            try {
                y = solve_algebraic(x, y, net, th);
            } catch (const AlgebraicNoConvergence& e) {
                traj.termination = Termination::SingularSurface;
                traj.detail = std::string("algebraic solve failed at topology switch: ") + e.what();
                traj.t_fail = t;
                return traj;
            } catch (const VoltageCollapseGuard& e) {
                traj.termination = Termination::GuardTripped;
                traj.detail = e.what();
                traj.t_fail = t;
                return traj;
            }
        }

        while (t < t_stop - 1e-14) {
            dt = std::min(dt, sc.dt_max);
            const bool clipped = t + dt >= t_stop - 1e-14;
            if (clipped) dt = t_stop - t;

            bool failed = false;
            Vector x5;
            Vector y_stage = y;
            try {
                for (int s = 0; s < kStages; ++s) {
                    Vector xs = x;
                    for (int q = 0; q < s; ++q) xs += dt * kA[s][q] * k[q];
                    y_stage = solve_algebraic(xs, y_stage, net, th);
                    k[s] = f_eval(xs, y_stage, sc.devices, net.omega0, th);
                }
            } catch (const AlgebraicNoConvergence& e) {
                traj.termination = Termination::SingularSurface;
                traj.detail = e.what();
                traj.t_fail = t + dt;
                return traj;
            } catch (const VoltageCollapseGuard& e) {
                traj.termination = Termination::GuardTripped;
                traj.detail = e.what();
                traj.t_fail = t + dt;
                return traj;
            }

            x5 = x;
            Vector x4 = x;
            for (int s = 0; s < kStages; ++s) {
                x5 += dt * kB5[s] * k[s];
                x4 += dt * kB4[s] * k[s];
            }
            const Real e = error_norm(x, x5, x5 - x4, opts.atol, opts.rtol);
            if (e <= 1.0) {
                x = x5;
                try {
                    y = solve_algebraic(x, y_stage, net, th);
                } catch (const AlgebraicNoConvergence& ex) {
                    traj.termination = Termination::SingularSurface;
                    traj.detail = ex.what();
                    traj.t_fail = t + dt;
                    return traj;
                } catch (const VoltageCollapseGuard& ex) {
                    traj.termination = Termination::GuardTripped;
                    traj.detail = ex.what();
                    traj.t_fail = t + dt;
                    return traj;
                }
                t += dt;
                if (opts.record_all || t >= t_stop - 1e-14) record(t, net);

                // Separation guard on the angle spread; the uniform angle mode
                // is a symmetry of the model and carries no information.
                const auto delta = x.segment(l.delta_off(), l.n_dev);
                if (l.n_dev > 1 &&
                    delta.maxCoeff() - delta.minCoeff() > opts.divergence_delta) {
                    traj.termination = Termination::Divergence;
                    traj.detail = "rotor angle spread exceeded guard";
                    return traj;
                }
            } else {
                failed = true;
            }
            // Boundary-clipped accepted steps must not shrink the controller.
            const Real dt_next = next_dt(dt, e);
            dt = (clipped && !failed) ? std::max(dt_next, std::min(1e-3, sc.dt_max)) : dt_next;
            if (failed && dt < opts.dt_min) {
                if (std::abs(traj.lambda1.back()) < th.eps_near) {
                    traj.termination = Termination::SingularSurface;
                    traj.detail = "step size collapse near the singular surface";
                    traj.t_fail = t + dt;
                    return traj;
                }
                throw NumericError("integration step size collapse at t = " + std::to_string(t));
            }
        }
    }

    traj.termination = Termination::Completed;
    return traj;
}

Trajectory simulate_transformed(const Scenario& sc, const SystemState& from,
                                const TransformedOptions& opts) {
    const Thresholds& th = opts.thresholds;
    const StateLayout l = sc.layout();
    const Index n = l.n_diff();
    const PowerNetwork& net = sc.post_fault;

    Vector z = from.z();
    Vector prev_u1;

    // Orientation: time runs forward in the region containing the equilibrium.
    Real s = 1.0;
    {
        const Eigenstructure es0 =
            eigendecompose(jacobian_y(from.x, from.y, net, th), th, nullptr);
        if (std::abs(es0.lambda1()) > th.eps_sing) s = es0.lambda1() > 0.0 ? 1.0 : -1.0;
        prev_u1 = es0.u1();
    }

    auto field = [&](const Vector& zv) {
        const SystemState st = SystemState::from_z(zv, n);
        const FieldEval fe = sigma_lambda_field(st.x, st.y, net, sc.devices, s, th,
                                                prev_u1.size() > 0 ? &prev_u1 : nullptr);
        Vector dz(zv.size());
        dz << fe.xdot, fe.ydot;
        return std::pair<Vector, Real>(dz, fe.lambda1);
    };

    Trajectory traj;
    Real tau = 0.0, t_rec = 0.0, arclength = 0.0;
    Real lambda_here = 0.0;

    auto record = [&](Real lam) {
        traj.tau.push_back(tau);
        traj.t_reconstructed.push_back(t_rec);
        traj.times.push_back(t_rec);
        traj.states.push_back(SystemState::from_z(z, n));
        traj.lambda1.push_back(lam);
        const SystemState st = SystemState::from_z(z, n);
        traj.g_inf.push_back(algebraic_residual(st.x, st.y, net, th).lpNorm<Eigen::Infinity>());
    };

    {
        auto [dz0, lam0] = field(z);
        (void)dz0;
        lambda_here = lam0;
    }
    record(lambda_here);

    Real dtau = std::min(opts.dtau_max, 1e-4);
    Vector k[kStages];
    int accepted = 0;

    while (tau < opts.tau_end && arclength < opts.arclength_cap) {
        dtau = std::min(dtau, opts.dtau_max);

        Real lam_end = lambda_here;
        for (int st = 0; st < kStages; ++st) {
            Vector zs = z;
            for (int q = 0; q < st; ++q) zs += dtau * kA[st][q] * k[q];
            auto [dz, lam] = field(zs);
            k[st] = dz;
            if (st == kStages - 1) lam_end = lam;
        }

        Vector z5 = z, z4 = z;
        for (int st = 0; st < kStages; ++st) {
            z5 += dtau * kB5[st] * k[st];
            z4 += dtau * kB4[st] * k[st];
        }
        const Real e = error_norm(z, z5, z5 - z4, opts.atol, opts.rtol);
        if (e <= 1.0) {
            arclength += (z5 - z).norm();
            z = z5;
            tau += dtau;
            ++accepted;

            SystemState st = SystemState::from_z(z, n);
            if (opts.project_every > 0 && accepted % opts.project_every == 0) {
                // One Newton step restores the constraint set; the exact field
                // preserves it only in exact arithmetic.
                const Vector g = algebraic_residual(st.x, st.y, net, th);
                const Matrix dyg = jacobian_y(st.x, st.y, net, th);
                st.y -= dyg.partialPivLu().solve(g);
                z.tail(l.n_alg()) = st.y;
            }

            const Eigenstructure es = eigendecompose(jacobian_y(st.x, st.y, net, th), th,
                                                     prev_u1.size() > 0 ? &prev_u1 : nullptr);
            prev_u1 = es.u1();
            const Real lam_new = es.lambda1();
            t_rec += 0.5 * (s * lambda_here + s * lam_new) * dtau;
            lambda_here = lam_new;
            record(lambda_here);

            const auto delta = st.x.segment(l.delta_off(), l.n_dev);
            if (l.n_dev > 1 && delta.maxCoeff() - delta.minCoeff() > 4.0 * M_PI) {
                traj.termination = Termination::Divergence;
                traj.detail = "rotor angle spread exceeded guard";
                return traj;
            }
            if (s * lambda_here < opts.lambda_stop) break;
        }
        dtau = next_dt(dtau, e);
        if (dtau < 1e-14) throw NumericError("rescaled integration step size collapse");
        (void)lam_end;
    }

    traj.termination = Termination::Completed;
    return traj;
}

SystemState advance_dae(const SystemState& from, Real t0, Real t1, const PowerNetwork& net,
                        const DeviceSet& devices, const Thresholds& th, int substeps) {
    Vector x = from.x;
    Vector y = from.y;
    const Real h = (t1 - t0) / substeps;
    for (int step = 0; step < substeps; ++step) {
        Vector ys = y;
        auto deriv = [&](const Vector& xs) {
            ys = solve_algebraic(xs, ys, net, th);
            return f_eval(xs, ys, devices, net.omega0, th);
        };
        const Vector k1 = deriv(x);
        const Vector k2 = deriv(x + 0.5 * h * k1);
        const Vector k3 = deriv(x + 0.5 * h * k2);
        const Vector k4 = deriv(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        y = solve_algebraic(x, ys, net, th);
    }
    return {x, y};
}

bool is_stable_outcome(const Trajectory& traj, const SystemState& sep, const StateLayout& l) {
    if (traj.termination != Termination::Completed) return false;
    if (traj.size() < 8) return false;

    const Real t_end = traj.times.back();
    const Real window = 0.2 * (t_end - traj.times.front());
    const Real t_split = t_end - 0.5 * window;
    const Real t_start = t_end - window;

    Real sum_a = 0.0, sum_b = 0.0;
    int n_a = 0, n_b = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] < t_start) continue;
        const Real d = eq_distance(traj.states[i], sep, l);
        if (traj.times[i] < t_split) {
            sum_a += d;
            ++n_a;
        } else {
            sum_b += d;
            ++n_b;
        }
    }
    if (n_a == 0 || n_b == 0) return false;
    const Real mean_a = sum_a / n_a, mean_b = sum_b / n_b;
    return mean_b <= mean_a * 1.05 + 1e-9;
}

CctResult compute_cct(const Scenario& sc, Real t_lo, Real t_hi, const CctOptions& opts) {
    if (!(t_lo >= 0.0 && t_lo < t_hi)) {
        throw BracketInvalid("bracket endpoints must satisfy 0 <= t_lo < t_hi");
    }

    const SystemState sep = solve_equilibrium(sc.initial, sc.post_fault, sc.devices,
                                              opts.sim.thresholds);
    const StateLayout l = sc.layout();

    auto verdict = [&](Real duration) {
        Scenario run = sc;
        run.fault_duration = duration;
        const Trajectory traj = simulate(run, opts.sim);
        return is_stable_outcome(traj, sep, l);
    };

    CctResult result;
    bool lo_ok, hi_ok;
    if (opts.max_threads >= 2) {
        auto fut = std::async(std::launch::async, verdict, t_lo);
        hi_ok = verdict(t_hi);
        lo_ok = fut.get();
    } else {
        lo_ok = verdict(t_lo);
        hi_ok = verdict(t_hi);
    }
    result.history.emplace_back(t_lo, lo_ok);
    result.history.emplace_back(t_hi, hi_ok);
    if (!lo_ok) throw BracketInvalid("lower bracket endpoint is not stable");
    if (hi_ok) throw BracketInvalid("upper bracket endpoint is not unstable");

    Real lo = t_lo, hi = t_hi;
    while (hi - lo > opts.tol) {
        const Real mid = 0.5 * (lo + hi);
        const bool stable = verdict(mid);
        result.history.emplace_back(mid, stable);
        if (stable) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    result.lo = lo;
    result.hi = hi;
    result.cct = 0.5 * (lo + hi);

    Real max_stable = -1.0, min_unstable = std::numeric_limits<Real>::infinity();
    for (const auto& [d, stable] : result.history) {
        if (stable) max_stable = std::max(max_stable, d);
        else min_unstable = std::min(min_unstable, d);
    }
    result.monotone = max_stable < min_unstable;
    return result;
}

}  // namespace vstab
