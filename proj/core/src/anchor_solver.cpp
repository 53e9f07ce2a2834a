#include "vstab/anchor_solver.hpp"

#include "vstab/simulator.hpp"
#include "vstab/singularity.hpp"

#include <cmath>
#include <random>

namespace vstab {

SingularHit detect_singular_hit(const Trajectory& traj, const Scenario& sc, const Thresholds& th) {
    if (traj.termination != Termination::SingularSurface) {
        throw NoSingularContact("trajectory terminated with " + to_string(traj.termination));
    }
    if (traj.size() == 0) throw NoSingularContact("empty trajectory");

    Real t_ok = traj.times.back();
    Real t_bad = std::max(traj.t_fail, t_ok + 1e-7);
    SystemState z = traj.back();
    const PowerNetwork& net = sc.network_at(0.5 * (t_ok + t_bad));
    Real lambda = singularity_indicator(z.x, z.y, net, th);

    // The branch folds with square-root behavior in time, so reaching the
    // lambda1 target needs a much finer window than the nominal 1e-6 s; the
    // floor only guards against a stuck bracket.
    const Real lambda_goal = th.eps_near * 1e-2;
    const Real t_floor = std::max(1e-13, 8.0 * std::numeric_limits<Real>::epsilon() * t_bad);
    while (std::abs(lambda) >= lambda_goal && (t_bad - t_ok) > t_floor) {
        const Real t_mid = 0.5 * (t_ok + t_bad);
        try {
            const SystemState z_mid = advance_dae(z, t_ok, t_mid, net, sc.devices, th);
            const Real lambda_mid = singularity_indicator(z_mid.x, z_mid.y, net, th);
            z = z_mid;
            t_ok = t_mid;
            lambda = lambda_mid;
        } catch (const Error&) {
            t_bad = t_mid;
        }
    }

    SingularHit hit;
    hit.z_sp = z;
    hit.t_hit = t_ok;
    hit.lambda1_at_hit = lambda;
    hit.trajectory_id = sc.name;
    return hit;
}

namespace {

// Constraint stack c(z) = [g; lambda1; v1' (Dxg) f] and its Jacobian.  The
// kappa row uses central differences; everything else is analytic.
class SaddleConstraints {
  public:
    SaddleConstraints(const PowerNetwork& net, const DeviceSet& devices, const Thresholds& th)
        : net_(net), devices_(devices), th_(th), l_(net.layout()) {}

    [[nodiscard]] Index n_c() const { return l_.n_alg() + 2; }
    [[nodiscard]] Index n_z() const { return l_.n_total(); }

    Vector value(const Vector& z, const Vector* track = nullptr) const {
        const SystemState st = SystemState::from_z(z, l_.n_diff());
        const Eigenstructure es =
            eigendecompose(jacobian_y(st.x, st.y, net_, th_), th_, track);
        const Vector f = f_eval(st.x, st.y, devices_, net_.omega0, th_);
        const Vector h = jacobian_x(st.x, st.y, net_) * f;

        Vector c(n_c());
        c.head(l_.n_alg()) = algebraic_residual(st.x, st.y, net_, th_);
        c[l_.n_alg()] = es.lambda1();
        c[l_.n_alg() + 1] = es.v1().dot(h);
        return c;
    }

    Matrix jacobian(const Vector& z, const Vector& u1_track) const {
        const SystemState st = SystemState::from_z(z, l_.n_diff());
        const Index n = l_.n_diff(), m = l_.n_alg();
        const Eigenstructure es =
            eigendecompose(jacobian_y(st.x, st.y, net_, th_), th_, &u1_track);

        Matrix a(n_c(), n_z());
        a.topLeftCorner(m, n) = jacobian_x(st.x, st.y, net_);
        a.topRightCorner(m, m) = jacobian_y(st.x, st.y, net_, th_);

        a.row(m).setZero();
        for (Index k = 0; k < m; ++k) {
            a(m, n + k) = dyg_dy_bilinear(st.y, net_, k, es.V.col(0), es.U.col(0), th_);
        }

        // kappa row by central differences (its analytic form needs second
        // derivatives of g that are not worth carrying).
        for (Index k = 0; k < n_z(); ++k) {
            const Real hstep = 1e-6 * std::max(1.0, std::abs(z[k]));
            Vector zp = z, zm = z;
            zp[k] += hstep;
            zm[k] -= hstep;
            const Real cp = kappa(zp, es.u1());
            const Real cm = kappa(zm, es.u1());
            a(m + 1, k) = (cp - cm) / (2.0 * hstep);
        }
        return a;
    }

    Real kappa(const Vector& z, const Vector& u1_track) const {
        const SystemState st = SystemState::from_z(z, l_.n_diff());
        const Eigenstructure es =
            eigendecompose(jacobian_y(st.x, st.y, net_, th_), th_, &u1_track);
        const Vector f = f_eval(st.x, st.y, devices_, net_.omega0, th_);
        return es.v1().dot(jacobian_x(st.x, st.y, net_) * f);
    }

    Vector u1(const Vector& z, const Vector* track = nullptr) const {
        const SystemState st = SystemState::from_z(z, l_.n_diff());
        return eigendecompose(jacobian_y(st.x, st.y, net_, th_), th_, track).u1();
    }

  private:
    const PowerNetwork& net_;
    const DeviceSet& devices_;
    const Thresholds& th_;
    StateLayout l_;
};

struct SolveAttempt {
    bool converged = false;
    Vector z;
    int iterations = 0;
};

SolveAttempt solve_from(const Vector& z0, const Vector& z_sp, const SaddleConstraints& cons,
                        const Thresholds& th, const SaddleSolveOptions& opts) {
    SolveAttempt out;
    Vector z = z0;
    Vector u1 = cons.u1(z0);

    auto feasible = [&](const Vector& c) {
        return c.head(c.size() - 2).lpNorm<Eigen::Infinity>() < th.eps_g &&
               std::abs(c[c.size() - 2]) < th.eps_sing && std::abs(c[c.size() - 1]) < th.eps_psi;
    };

    Real merit_mu = 1.0;
    for (int it = 0; it < opts.max_outer; ++it) {
        out.iterations = it;
        Vector c;
        Matrix a;
        try {
            c = cons.value(z, &u1);
            a = cons.jacobian(z, u1);
            u1 = cons.u1(z, &u1);
        } catch (const Error&) {
            return out;  // left the domain; caller may restart
        }

        const Matrix aat = a * a.transpose();
        const auto lu = aat.partialPivLu();

        // Projected gradient of the distance objective.
        const Vector grad = 2.0 * (z - z_sp);
        const Vector pg = grad - a.transpose() * lu.solve(a * grad);

        if (feasible(c) && pg.norm() < opts.stationarity_tol) {
            out.converged = true;
            out.z = z;
            return out;
        }

        // Least-distance QP step: min ||z + d - z_sp|| s.t. c + A d = 0.
        const Vector target = z_sp - z;
        const Vector w = lu.solve(c + a * target);
        const Vector d = target - a.transpose() * w;
        merit_mu = std::max({merit_mu, 2.0 * w.lpNorm<Eigen::Infinity>(), 1.0});

        auto merit = [&](const Vector& zv) {
            const Vector cv = cons.value(zv, &u1);
            return (zv - z_sp).squaredNorm() + merit_mu * cv.norm();
        };

        Real phi0;
        try {
            phi0 = merit(z);
        } catch (const Error&) {
            return out;
        }
        bool accepted = false;
        Real alpha = 1.0;
        for (int ls = 0; ls < 12; ++ls) {
            const Vector zn = z + alpha * d;
            try {
                if (merit(zn) < phi0 - 1e-12 || alpha * d.norm() < 1e-15) {
                    z = zn;
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
                // out of domain; shrink
            }
            alpha *= 0.5;
        }
        if (!accepted) return out;
    }
    return out;
}

}  // namespace

PseudoSaddle controlling_pseudo_saddle(const SingularHit& hit, const PowerNetwork& net,
                                       const DeviceSet& devices, const Thresholds& th,
                                       const SaddleSolveOptions& opts) {
    const StateLayout l = net.layout();
    const Vector z_sp = hit.z_sp.z();
    SaddleConstraints cons(net, devices, th);

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<Real> noise(0.0, opts.restart_sigma);

    SolveAttempt attempt = solve_from(z_sp, z_sp, cons, th, opts);
    for (int k = 0; k < opts.multistart && !attempt.converged; ++k) {
        Vector z0 = z_sp;
        for (Index i = 0; i < z0.size(); ++i) z0[i] += noise(rng);
        attempt = solve_from(z0, z_sp, cons, th, opts);
    }
    if (!attempt.converged) {
        throw NoConvergence("pseudo-saddle solve did not converge within " +
                            std::to_string(opts.max_outer) + " outer iterations (with " +
                            std::to_string(opts.multistart) + " restarts)");
    }

    PseudoSaddle ps;
    ps.z_cps = SystemState::from_z(attempt.z, l.n_diff());
    ps.iterations = attempt.iterations;
    ps.distance = (attempt.z - z_sp).norm();

    const PseudoEquilibriumResidual res =
        pseudo_equilibrium_residual(ps.z_cps.x, ps.z_cps.y, net, devices, th);
    ps.g_norm = res.g_norm;
    ps.lambda1 = res.lambda1;
    ps.kappa_norm = res.kappa_norm;

    const TransformedJacobian tj = transformed_jacobian(ps.z_cps, net, devices, true, 1.0, th);
    ps.J = tj.J;
    const SaddleSpectrum spec = analyze_saddle_spectrum(ps.J, th);
    if (spec.n_positive != 1 || spec.n_negative != 1) {
        throw NotASaddle("transformed Jacobian has " + std::to_string(spec.n_positive) +
                         " positive and " + std::to_string(spec.n_negative) +
                         " negative significant eigenvalues");
    }
    ps.mu_unstable = spec.mu;
    ps.nu_stable = spec.nu;
    ps.eta = spec.eta;
    return ps;
}

}  // namespace vstab
