#include "vstab/singularity.hpp"

#include <cmath>

namespace vstab {

std::string to_string(SingularityClass c) {
    switch (c) {
        case SingularityClass::Regular: return "Regular";
        case SingularityClass::SingularGeneric: return "SingularGeneric";
        case SingularityClass::PseudoEquilibrium: return "PseudoEquilibrium";
        case SingularityClass::SemiSingularCandidate: return "SemiSingularCandidate";
    }
    return "Unknown";
}

Real singularity_indicator(const Vector& x, const Vector& y, const PowerNetwork& net,
                           const Thresholds& th, const Vector* track_u1) {
    const Eigenstructure es = eigendecompose(jacobian_y(x, y, net, th), th, track_u1);
    return es.lambda1();
}

PseudoEquilibriumResidual pseudo_equilibrium_residual(const Vector& x, const Vector& y,
                                                      const PowerNetwork& net,
                                                      const DeviceSet& devices,
                                                      const Thresholds& th) {
    const Eigenstructure es = eigendecompose(jacobian_y(x, y, net, th), th);
    const Vector f = f_eval(x, y, devices, net.omega0, th);
    const Vector h = jacobian_x(x, y, net) * f;

    PseudoEquilibriumResidual r;
    r.g_norm = algebraic_residual(x, y, net, th).norm();
    r.lambda1 = es.lambda1();
    // u1 is unit, so ||u1 v1' h|| reduces to |v1' h|.
    r.kappa_norm = std::abs(es.v1().dot(h));
    return r;
}

Real semi_singular_scalar(const Vector& x, const Vector& y, const PowerNetwork& net,
                          const Thresholds& th, Real* approx_out) {
    (void)x;
    const Index nb = net.n_bus();
    const Eigenstructure es = eigendecompose(jacobian_y(x, y, net, th), th);
    const Vector u1 = es.u1();
    const Vector v1 = es.v1();

    Real exact = 0.0;
    for (Index k = 0; k < 2 * nb; ++k) {
        exact += dyg_dy_bilinear(y, net, k, v1, u1, th) * u1[k];
    }

    if (approx_out != nullptr) {
        // Vx-block-only approximation: keeps just the -v1x db/dVx u1x terms.
        Real approx = 0.0;
        for (Index i = 0; i < nb; ++i) {
            if (net.P[i] == 0.0 && net.Q[i] == 0.0) continue;
            const Matrix d = dyg_dy(y, net, i, th);
            approx += v1[i] * d(i, i) * u1[i] * u1[i];
        }
        *approx_out = approx;
    }
    return exact;
}

SingularityReport classify(const Vector& x, const Vector& y, const PowerNetwork& net,
                           const DeviceSet& devices, const Thresholds& th) {
    SingularityReport rep;
    const PseudoEquilibriumResidual r = pseudo_equilibrium_residual(x, y, net, devices, th);
    rep.lambda1 = r.lambda1;
    rep.g_norm = r.g_norm;
    rep.psi_residual = r.kappa_norm;
    rep.xi_scalar = semi_singular_scalar(x, y, net, th, &rep.xi_scalar_approx);

    if (std::abs(rep.lambda1) >= th.eps_sing) {
        rep.classification = SingularityClass::Regular;
    } else if (rep.psi_residual < th.eps_psi) {
        rep.classification = SingularityClass::PseudoEquilibrium;
    } else if (std::abs(rep.xi_scalar) < th.eps_xi) {
        rep.classification = SingularityClass::SemiSingularCandidate;
    } else {
        rep.classification = SingularityClass::SingularGeneric;
    }
    return rep;
}

}  // namespace vstab
